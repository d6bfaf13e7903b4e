#include "pevdn/mpc.hpp"

#include <algorithm>
#include <cstring>
#include <fstream>
#include <stdexcept>
#include <string>
#include <thread>

namespace pevdn {

namespace {

void put_u32(std::vector<uint8_t>& out, uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<uint8_t>(v >> (8 * i)));
}

void put_u16(std::vector<uint8_t>& out, uint16_t v) {
  for (int i = 0; i < 2; ++i) out.push_back(static_cast<uint8_t>(v >> (8 * i)));
}

void put_u64(std::vector<uint8_t>& out, uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<uint8_t>(v >> (8 * i)));
}

uint64_t read_le(std::span<const uint8_t> bytes, size_t offset, size_t width) {
  uint64_t v = 0;
  for (size_t i = 0; i < width; ++i) v |= static_cast<uint64_t>(bytes[offset + i]) << (8 * i);
  return v;
}

constexpr size_t kHeaderSize = 4 + 2 + 2 + 1 + 4;

}  // namespace

size_t encoded_size(const ProtocolMessage& msg) { return kHeaderSize + 8 * msg.payload.size(); }

std::vector<uint8_t> encode_message(const ProtocolMessage& msg) {
  std::vector<uint8_t> out;
  out.reserve(encoded_size(msg));
  put_u32(out, msg.round_id);
  put_u16(out, msg.sender);
  put_u16(out, msg.receiver);
  out.push_back(static_cast<uint8_t>(msg.kind));
  put_u32(out, static_cast<uint32_t>(msg.payload.size()));
  for (uint64_t w : msg.payload) put_u64(out, w);
  return out;
}

ProtocolMessage decode_message(std::span<const uint8_t> bytes) {
  if (bytes.size() < kHeaderSize) throw ProtocolError("decode_message: truncated header");
  ProtocolMessage msg;
  msg.round_id = static_cast<uint32_t>(read_le(bytes, 0, 4));
  msg.sender = static_cast<AgentId>(read_le(bytes, 4, 2));
  msg.receiver = static_cast<AgentId>(read_le(bytes, 6, 2));
  const uint8_t kind = bytes[8];
  if (kind > static_cast<uint8_t>(MsgKind::kIndices)) {
    throw ProtocolError("decode_message: unknown message kind " + std::to_string(kind));
  }
  msg.kind = static_cast<MsgKind>(kind);
  const uint64_t payload_len = read_le(bytes, 9, 4);
  if (bytes.size() != kHeaderSize + 8 * payload_len) {
    throw ProtocolError("decode_message: payload length mismatch");
  }
  msg.payload.reserve(payload_len);
  for (uint64_t i = 0; i < payload_len; ++i) {
    msg.payload.push_back(read_le(bytes, kHeaderSize + 8 * i, 8));
  }
  return msg;
}

void Transcript::save(const std::string& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("Transcript::save: cannot open " + path);
  for (const auto& msg : messages_) {
    const auto bytes = encode_message(msg);
    out.write(reinterpret_cast<const char*>(bytes.data()),
              static_cast<std::streamsize>(bytes.size()));
  }
  if (!out) throw std::runtime_error("Transcript::save: write failed");
}

Transcript Transcript::load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("Transcript::load: cannot open " + path);
  std::vector<uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  Transcript transcript;
  size_t offset = 0;
  while (offset < bytes.size()) {
    if (bytes.size() - offset < kHeaderSize) throw ProtocolError("Transcript::load: truncated frame");
    const uint64_t payload_len = read_le(bytes, offset + 9, 4);
    const size_t frame = kHeaderSize + 8 * payload_len;
    if (bytes.size() - offset < frame) throw ProtocolError("Transcript::load: truncated frame");
    transcript.messages_.push_back(
        decode_message(std::span<const uint8_t>(bytes.data() + offset, frame)));
    offset += frame;
  }
  return transcript;
}

InProcessTransport::InProcessTransport(int n_agents, uint64_t shuffle_seed)
    : n_agents_(n_agents), rng_(shuffle_seed) {
  if (n_agents < 2) throw std::invalid_argument("InProcessTransport: need at least 2 agents");
  pending_.assign(static_cast<size_t>(n_agents),
                  std::vector<std::vector<std::vector<uint8_t>>>(static_cast<size_t>(n_agents)));
}

void InProcessTransport::enqueue(AgentId receiver, const ProtocolMessage& msg) {
  pending_[receiver][msg.sender].push_back(encode_message(msg));
}

void InProcessTransport::send(const ProtocolMessage& msg) {
  if (msg.sender >= n_agents_) throw ProtocolError("send: sender id out of range");
  if (transcript_ != nullptr) transcript_->append(msg);
  if (msg.receiver == kBroadcast) {
    for (AgentId r = 0; r < n_agents_; ++r) {
      if (r != msg.sender) enqueue(r, msg);
    }
    return;
  }
  if (msg.receiver >= n_agents_) throw ProtocolError("send: receiver id out of range");
  if (msg.receiver == msg.sender) throw ProtocolError("send: self-addressed message");
  enqueue(msg.receiver, msg);
}

ProtocolMessage InProcessTransport::recv(AgentId receiver) {
  if (receiver >= n_agents_) throw ProtocolError("recv: receiver id out of range");
  auto& queues = pending_[receiver];
  std::vector<size_t> ready;
  for (size_t s = 0; s < queues.size(); ++s) {
    if (!queues[s].empty()) ready.push_back(s);
  }
  if (ready.empty()) {
    throw ProtocolError("recv: agent " + std::to_string(receiver) +
                        " waiting on a message that will never arrive");
  }
  const size_t sender = ready[rng_.uniform_below(ready.size())];
  const std::vector<uint8_t> frame = std::move(queues[sender].front());
  queues[sender].erase(queues[sender].begin());
  return decode_message(frame);
}

bool InProcessTransport::idle() const {
  for (const auto& per_receiver : pending_) {
    for (const auto& q : per_receiver) {
      if (!q.empty()) return false;
    }
  }
  return true;
}

SummationRound::SummationRound(const Field& field, AgentId self, int n_agents, uint32_t round_id,
                               int precision)
    : field_(field), self_(self), n_agents_(n_agents), round_id_(round_id), precision_(precision) {
  if (n_agents < 2) throw std::invalid_argument("SummationRound: need at least 2 agents");
  if (self >= n_agents) throw std::invalid_argument("SummationRound: agent id out of range");
  share_from_.assign(static_cast<size_t>(n_agents), 0);
  partial_from_.assign(static_cast<size_t>(n_agents), 0);
}

std::vector<ProtocolMessage> SummationRound::open(std::span<const double> m_values, Rng& rng) {
  if (phase_ != Phase::kIdle) throw ProtocolError("open: round already opened");
  payload_len_ = m_values.size();
  share_accum_.assign(payload_len_, FieldElement{0});
  partial_accum_.assign(payload_len_, FieldElement{0});

  // One ShareSet per entry; piece j of every entry goes to agent j, piece
  // self_ stays local (folded straight into the accumulator).
  std::vector<ProtocolMessage> messages(static_cast<size_t>(n_agents_));
  for (AgentId j = 0; j < n_agents_; ++j) {
    messages[j] = ProtocolMessage{round_id_, self_, j, MsgKind::kShare, {}};
    messages[j].payload.reserve(payload_len_);
  }
  for (const double value : m_values) {
    const ShareSet shares = field_.share(field_.encode(value, precision_), n_agents_, rng);
    for (AgentId j = 0; j < n_agents_; ++j) messages[j].payload.push_back(shares[j].value);
  }
  for (size_t k = 0; k < payload_len_; ++k) {
    share_accum_[k] = field_.add(share_accum_[k], FieldElement{messages[self_].payload[k]});
  }
  share_from_[self_] = 1;
  shares_seen_ = 1;
  messages.erase(messages.begin() + self_);
  phase_ = Phase::kAwaitingShares;
  if (n_agents_ == shares_seen_) phase_ = Phase::kSummed;  // unreachable for n >= 2
  return messages;
}

void SummationRound::on_message(const ProtocolMessage& msg) {
  if (msg.round_id != round_id_) {
    throw ProtocolError("on_message: round id " + std::to_string(msg.round_id) + " != " +
                        std::to_string(round_id_));
  }
  if (msg.sender >= n_agents_ || msg.sender == self_) {
    throw ProtocolError("on_message: bad sender " + std::to_string(msg.sender));
  }
  if (msg.payload.size() != payload_len_) {
    throw ProtocolError("on_message: payload length " + std::to_string(msg.payload.size()) +
                        " != " + std::to_string(payload_len_));
  }
  switch (msg.kind) {
    case MsgKind::kShare: {
      if (phase_ != Phase::kAwaitingShares) throw ProtocolError("on_message: SHARE out of phase");
      if (share_from_[msg.sender] != 0) {
        throw ProtocolError("on_message: duplicate SHARE from " + std::to_string(msg.sender));
      }
      share_from_[msg.sender] = 1;
      for (size_t k = 0; k < payload_len_; ++k) {
        share_accum_[k] = field_.add(share_accum_[k], field_.element(msg.payload[k]));
      }
      if (++shares_seen_ == n_agents_) phase_ = Phase::kSummed;
      break;
    }
    case MsgKind::kPartialSum: {
      // A faster peer may broadcast its partial while this agent is still
      // collecting shares; the accumulator is order-free, so buffer it.
      // Only kIdle and kDone are illegal here.
      if (phase_ == Phase::kIdle || phase_ == Phase::kDone) {
        throw ProtocolError("on_message: PARTIAL_SUM outside an active round");
      }
      if (partial_from_[msg.sender] != 0) {
        throw ProtocolError("on_message: duplicate PARTIAL_SUM from " + std::to_string(msg.sender));
      }
      partial_from_[msg.sender] = 1;
      for (size_t k = 0; k < payload_len_; ++k) {
        partial_accum_[k] = field_.add(partial_accum_[k], field_.element(msg.payload[k]));
      }
      // Own partial joins in make_partial_sum, so the count tops out at n
      // only after this agent has emitted.
      if (++partials_seen_ == n_agents_) phase_ = Phase::kDone;
      break;
    }
    case MsgKind::kIndices:
      throw ProtocolError("on_message: INDICES message inside a summation round");
  }
}

ProtocolMessage SummationRound::make_partial_sum() {
  if (phase_ != Phase::kSummed) {
    throw ProtocolError("make_partial_sum: incomplete round (have " +
                        std::to_string(shares_seen_) + "/" + std::to_string(n_agents_) +
                        " shares)");
  }
  ProtocolMessage msg{round_id_, self_, kBroadcast, MsgKind::kPartialSum, {}};
  msg.payload.reserve(payload_len_);
  for (const FieldElement e : share_accum_) msg.payload.push_back(e.value);
  // Own partial joins the accumulator directly; the broadcast reaches the
  // others.
  for (size_t k = 0; k < payload_len_; ++k) {
    partial_accum_[k] = field_.add(partial_accum_[k], share_accum_[k]);
  }
  partial_from_[self_] = 1;
  partials_seen_ = 1;
  phase_ = partials_seen_ == n_agents_ ? Phase::kDone : Phase::kAwaitingPartials;
  return msg;
}

std::vector<double> SummationRound::result() const {
  if (phase_ != Phase::kDone) throw ProtocolError("result: incomplete round");
  std::vector<double> out;
  out.reserve(payload_len_);
  for (const FieldElement e : partial_accum_) out.push_back(field_.decode(e, precision_));
  return out;
}

namespace {

void check_vector_lengths(const std::vector<std::vector<double>>& m_vectors) {
  for (const auto& v : m_vectors) {
    if (v.size() != m_vectors[0].size()) {
      throw std::invalid_argument("run_summation: m-vector lengths differ across agents");
    }
  }
}

}  // namespace

std::vector<std::vector<double>> run_summation(Transport& transport, const Field& field,
                                               int precision,
                                               const std::vector<std::vector<double>>& m_vectors,
                                               std::span<Rng> share_rngs, uint32_t round_id) {
  const int n = transport.n_agents();
  if (static_cast<int>(m_vectors.size()) != n || static_cast<int>(share_rngs.size()) != n) {
    throw std::invalid_argument("run_summation: need one m-vector and one rng per agent");
  }
  check_vector_lengths(m_vectors);

  std::vector<SummationRound> rounds;
  rounds.reserve(static_cast<size_t>(n));
  for (AgentId i = 0; i < n; ++i) {
    rounds.emplace_back(field, i, n, round_id, precision);
  }

  // Share phase: everyone opens, then everyone drains shares until its
  // accumulator is complete.
  for (AgentId i = 0; i < n; ++i) {
    for (auto& msg : rounds[i].open(m_vectors[i], share_rngs[i])) transport.send(msg);
  }
  for (AgentId i = 0; i < n; ++i) {
    while (rounds[i].phase() == SummationRound::Phase::kAwaitingShares) {
      rounds[i].on_message(transport.recv(i));
    }
  }
  // Partial-sum phase with the same barrier.
  for (AgentId i = 0; i < n; ++i) transport.send(rounds[i].make_partial_sum());
  for (AgentId i = 0; i < n; ++i) {
    while (rounds[i].phase() != SummationRound::Phase::kDone) {
      rounds[i].on_message(transport.recv(i));
    }
  }

  std::vector<std::vector<double>> results;
  results.reserve(static_cast<size_t>(n));
  for (AgentId i = 0; i < n; ++i) results.push_back(rounds[i].result());
  for (int i = 1; i < n; ++i) {
    if (results[static_cast<size_t>(i)] != results[0]) {
      throw ProtocolError("run_summation: agents decoded different sums");
    }
  }
  return results;
}

std::vector<std::vector<double>> run_summation_threaded(
    Transport& transport, const Field& field, int precision,
    const std::vector<std::vector<double>>& m_vectors, std::span<Rng> share_rngs,
    uint32_t round_id) {
  const int n = transport.n_agents();
  if (static_cast<int>(m_vectors.size()) != n || static_cast<int>(share_rngs.size()) != n) {
    throw std::invalid_argument("run_summation_threaded: need one m-vector and one rng per agent");
  }
  check_vector_lengths(m_vectors);

  std::vector<std::vector<double>> results(static_cast<size_t>(n));
  std::vector<std::string> errors(static_cast<size_t>(n));
  std::vector<std::thread> workers;
  workers.reserve(static_cast<size_t>(n));
  for (int i = 0; i < n; ++i) {
    workers.emplace_back([&, i] {
      try {
        const auto self = static_cast<AgentId>(i);
        SummationRound round(field, self, n, round_id, precision);
        for (auto& msg : round.open(m_vectors[static_cast<size_t>(i)],
                                    share_rngs[static_cast<size_t>(i)])) {
          transport.send(msg);
        }
        while (round.phase() == SummationRound::Phase::kAwaitingShares) {
          round.on_message(transport.recv(self));
        }
        transport.send(round.make_partial_sum());
        while (round.phase() != SummationRound::Phase::kDone) {
          round.on_message(transport.recv(self));
        }
        results[static_cast<size_t>(i)] = round.result();
      } catch (const std::exception& e) {
        errors[static_cast<size_t>(i)] = e.what();
      }
    });
  }
  for (auto& w : workers) w.join();
  for (const auto& err : errors) {
    if (!err.empty()) throw ProtocolError("run_summation_threaded: " + err);
  }
  for (int i = 1; i < n; ++i) {
    if (results[static_cast<size_t>(i)] != results[0]) {
      throw ProtocolError("run_summation_threaded: agents decoded different sums");
    }
  }
  return results;
}

}  // namespace pevdn
