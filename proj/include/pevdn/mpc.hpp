#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "pevdn/errors.hpp"
#include "pevdn/field.hpp"
#include "pevdn/rng.hpp"

namespace pevdn {

using AgentId = uint16_t;
inline constexpr AgentId kBroadcast = 0xFFFF;

enum class MsgKind : uint8_t {
  kShare = 0,
  kPartialSum = 1,
  kIndices = 2,
};

// One unit of the summation protocol. The payload carries field elements
// for SHARE/PARTIAL_SUM rounds and episode indices for INDICES broadcasts.
struct ProtocolMessage {
  uint32_t round_id = 0;
  AgentId sender = 0;
  AgentId receiver = kBroadcast;
  MsgKind kind = MsgKind::kShare;
  std::vector<uint64_t> payload;
};

// Wire format, bit-exact:
//   round_id u32 LE | sender u16 LE | receiver u16 LE | kind u8 |
//   payload_len u32 LE | payload as 8-byte LE words.
std::vector<uint8_t> encode_message(const ProtocolMessage& msg);
ProtocolMessage decode_message(std::span<const uint8_t> bytes);  // throws ProtocolError
size_t encoded_size(const ProtocolMessage& msg);

// Append-only record of every message a transport carried, in send order.
class Transcript {
 public:
  void append(const ProtocolMessage& msg) { messages_.push_back(msg); }
  const std::vector<ProtocolMessage>& messages() const { return messages_; }

  void save(const std::string& path) const;  // concatenated wire frames
  static Transcript load(const std::string& path);

 private:
  std::vector<ProtocolMessage> messages_;
};

// Reliable transport connecting all agent pairs. Per-(sender, receiver)
// order is preserved; cross-sender interleaving is unconstrained and the
// protocol must be correct under all of it.
class Transport {
 public:
  virtual ~Transport() = default;

  virtual void send(const ProtocolMessage& msg) = 0;

  // Next message addressed to `receiver`. Throws ProtocolError if no
  // message can ever arrive (the simulated transport is reliable, so that
  // signals a harness bug).
  virtual ProtocolMessage recv(AgentId receiver) = 0;

  virtual int n_agents() const = 0;
};

// Deterministic in-process transport. Every message passes through the wire
// codec, and recv picks among senders with pending traffic using a seeded
// shuffler, so cross-sender delivery order varies while per-pair FIFO order
// holds.
class InProcessTransport final : public Transport {
 public:
  InProcessTransport(int n_agents, uint64_t shuffle_seed);

  void set_transcript(Transcript* sink) { transcript_ = sink; }

  void send(const ProtocolMessage& msg) override;
  ProtocolMessage recv(AgentId receiver) override;
  int n_agents() const override { return n_agents_; }

  bool idle() const;  // no pending messages anywhere

 private:
  void enqueue(AgentId receiver, const ProtocolMessage& msg);

  int n_agents_;
  Rng rng_;
  // pending_[receiver][sender] = FIFO of encoded frames
  std::vector<std::vector<std::vector<std::vector<uint8_t>>>> pending_;
  Transcript* transcript_ = nullptr;
};

// Loopback TCP mesh speaking the same wire format; one socket per agent
// pair, one reader thread per connection end. Integration smoke tests only.
class TcpMeshTransport final : public Transport {
 public:
  explicit TcpMeshTransport(int n_agents);
  ~TcpMeshTransport() override;

  void send(const ProtocolMessage& msg) override;
  ProtocolMessage recv(AgentId receiver) override;
  int n_agents() const override;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

// Per-agent state machine for one vectorized summation round: encode and
// share the m-values, accumulate incoming shares, broadcast the partial sum,
// accumulate partials, decode. Phase order is fixed; early or malformed
// inputs raise ProtocolError rather than corrupting the round.
class SummationRound {
 public:
  enum class Phase { kIdle, kAwaitingShares, kSummed, kAwaitingPartials, kDone };

  SummationRound(const Field& field, AgentId self, int n_agents, uint32_t round_id, int precision);

  // Encodes and shares the values; keeps this agent's own piece and returns
  // one SHARE message per other agent. Phase: kIdle -> kAwaitingShares.
  std::vector<ProtocolMessage> open(std::span<const double> m_values, Rng& rng);

  // Feed a SHARE or PARTIAL_SUM addressed to this agent.
  void on_message(const ProtocolMessage& msg);

  // Elementwise field sum of the kept share and all received shares,
  // broadcast to the other agents. Requires all n shares (phase kSummed).
  ProtocolMessage make_partial_sum();

  Phase phase() const { return phase_; }
  uint32_t round_id() const { return round_id_; }

  // Decoded per-entry sums; requires phase kDone.
  std::vector<double> result() const;

 private:
  const Field& field_;
  AgentId self_;
  int n_agents_;
  uint32_t round_id_;
  int precision_;
  size_t payload_len_ = 0;

  Phase phase_ = Phase::kIdle;
  std::vector<FieldElement> share_accum_;
  std::vector<FieldElement> partial_accum_;
  int shares_seen_ = 0;
  int partials_seen_ = 0;
  std::vector<uint8_t> share_from_;    // per sender, received flag
  std::vector<uint8_t> partial_from_;
};

// Drives one full summation round for all agents over the transport,
// single-threaded with barrier semantics: all shares are sent before any
// partial sum is formed. Every agent must present the same vector length.
// Returns the per-agent decoded sums (identical across agents, asserted).
std::vector<std::vector<double>> run_summation(Transport& transport, const Field& field,
                                               int precision,
                                               const std::vector<std::vector<double>>& m_vectors,
                                               std::span<Rng> share_rngs, uint32_t round_id);

// Same protocol, one thread per agent with blocking receives; used with the
// TCP transport.
std::vector<std::vector<double>> run_summation_threaded(
    Transport& transport, const Field& field, int precision,
    const std::vector<std::vector<double>>& m_vectors, std::span<Rng> share_rngs,
    uint32_t round_id);

}  // namespace pevdn
