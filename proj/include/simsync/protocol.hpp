#pragma once

// Bit-exact binary wire format for all server->client messages. Every frame
// is [type: u8][payload length: u32 LE][payload]; integers are little-endian
// and reals are IEEE-754 binary64 little-endian, fields in declaration
// order. Byte sizes are part of the evaluation contract, so the layout is
// fixed by hand rather than delegated to a serializer. Full byte-level
// documentation lives in docs/wire-format.md.

#include <bit>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "simsync/errors.hpp"
#include "simsync/grid.hpp"

namespace simsync {

enum class MessageType : std::uint8_t {
  Init = 0,
  Certify = 1,
  FullUpdate = 2,
  PartialUpdate = 3,
  StreamState = 4,
};

struct InitMessage {
  std::uint8_t surrogate_level = 5;
  std::uint8_t reference_level = 6;
  std::uint32_t n_t = 100;
  double dt = 1e-4;
  double alpha = 1.0;
  double q_max = 0.0078125;
  double sigma = 0.00390625;
  std::uint8_t norm = 0;      // 0 = max, 1 = euclidean
  std::uint16_t n_e = 50;
  std::uint64_t basic_seed = 0;
  std::uint8_t strategy = 2;  // 0..4: simple, advanced, full, partial, combined
  std::vector<double> initial_state;  // surrogate-grid length

  friend bool operator==(const InitMessage&, const InitMessage&) = default;
};

struct CertifyMessage {
  std::uint32_t step = 0;
  friend bool operator==(const CertifyMessage&, const CertifyMessage&) = default;
};

struct FullUpdateMessage {
  std::uint32_t step = 0;
  std::vector<double> state;  // surrogate-grid length
  friend bool operator==(const FullUpdateMessage&, const FullUpdateMessage&) = default;
};

struct PartialUpdateMessage {
  std::uint32_t step = 0;
  std::vector<std::pair<std::uint32_t, double>> pairs;  // strictly increasing indices
  friend bool operator==(const PartialUpdateMessage&, const PartialUpdateMessage&) = default;
};

struct StreamStateMessage {
  std::uint32_t step = 0;
  std::vector<double> state;  // reference- or surrogate-grid length per strategy
  friend bool operator==(const StreamStateMessage&, const StreamStateMessage&) = default;
};

using Message = std::variant<InitMessage, CertifyMessage, FullUpdateMessage,
                             PartialUpdateMessage, StreamStateMessage>;

inline constexpr std::size_t kFrameHeaderBytes = 5;
inline constexpr std::size_t kMaxPayloadBytes = 256u << 20;

namespace wire {

inline void put_u8(std::vector<std::uint8_t>& out, std::uint8_t v) { out.push_back(v); }

inline void put_u16(std::vector<std::uint8_t>& out, std::uint16_t v) {
  out.push_back(static_cast<std::uint8_t>(v));
  out.push_back(static_cast<std::uint8_t>(v >> 8));
}

inline void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

inline void put_u64(std::vector<std::uint8_t>& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

inline void put_f64(std::vector<std::uint8_t>& out, double v) {
  put_u64(out, std::bit_cast<std::uint64_t>(v));
}

/// Cursor over a received payload; all getters throw on overrun.
class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> data) : data_(data) {}

  std::uint8_t u8() { return take(1)[0]; }
  std::uint16_t u16() {
    const auto b = take(2);
    return static_cast<std::uint16_t>(b[0] | (b[1] << 8));
  }
  std::uint32_t u32() {
    const auto b = take(4);
    return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
           (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
  }
  std::uint64_t u64() {
    std::uint64_t v = 0;
    const auto b = take(8);
    for (int i = 7; i >= 0; --i) v = (v << 8) | b[static_cast<std::size_t>(i)];
    return v;
  }
  double f64() { return std::bit_cast<double>(u64()); }

  std::size_t remaining() const { return data_.size() - pos_; }
  bool done() const { return remaining() == 0; }

 private:
  std::span<const std::uint8_t> take(std::size_t n) {
    if (remaining() < n) throw ProtocolError("truncated payload");
    auto s = data_.subspan(pos_, n);
    pos_ += n;
    return s;
  }

  std::span<const std::uint8_t> data_;
  std::size_t pos_ = 0;
};

}  // namespace wire

inline MessageType message_type(const Message& msg) {
  return static_cast<MessageType>(msg.index());
}

namespace detail {

inline void validate_init(const InitMessage& m) {
  if (m.surrogate_level > kMaxGridLevel || m.reference_level > kMaxGridLevel) {
    throw ProtocolError("grid level out of range in init message");
  }
  if (m.reference_level < m.surrogate_level) {
    throw ProtocolError("reference level must not be coarser than surrogate level");
  }
  if (m.norm > 1) throw ProtocolError("unknown norm code");
  if (m.strategy > 4) throw ProtocolError("unknown strategy code");
  if (m.n_e < 2) throw ProtocolError("init requires n_e >= 2");
  const int side = (1 << m.surrogate_level) + 1;
  if (m.initial_state.size() != static_cast<std::size_t>(side) * side) {
    throw ProtocolError("initial state length does not match the surrogate grid");
  }
}

inline void validate_pairs(const std::vector<std::pair<std::uint32_t, double>>& pairs) {
  if (pairs.empty()) throw ProtocolError("partial update requires at least one pair");
  for (std::size_t i = 1; i < pairs.size(); ++i) {
    if (pairs[i].first <= pairs[i - 1].first) {
      throw ProtocolError("partial update indices must strictly increase");
    }
  }
}

}  // namespace detail

/// Exact encoded size in bytes, header included, without encoding.
inline std::size_t message_size(const Message& msg) {
  struct Sizer {
    std::size_t operator()(const InitMessage& m) const {
      return kFrameHeaderBytes + 2 + 4 + 4 * 8 + 1 + 2 + 8 + 1 + 8 * m.initial_state.size();
    }
    std::size_t operator()(const CertifyMessage&) const { return kFrameHeaderBytes + 4; }
    std::size_t operator()(const FullUpdateMessage& m) const {
      return kFrameHeaderBytes + 4 + 8 * m.state.size();
    }
    std::size_t operator()(const PartialUpdateMessage& m) const {
      return kFrameHeaderBytes + 4 + 4 + 12 * m.pairs.size();
    }
    std::size_t operator()(const StreamStateMessage& m) const {
      return kFrameHeaderBytes + 4 + 8 * m.state.size();
    }
  };
  return std::visit(Sizer{}, msg);
}

inline std::vector<std::uint8_t> encode(const Message& msg) {
  std::vector<std::uint8_t> out;
  out.reserve(message_size(msg));
  wire::put_u8(out, static_cast<std::uint8_t>(message_type(msg)));
  wire::put_u32(out, 0);  // payload length, patched below

  struct Encoder {
    std::vector<std::uint8_t>& out;

    void operator()(const InitMessage& m) const {
      detail::validate_init(m);
      wire::put_u8(out, m.surrogate_level);
      wire::put_u8(out, m.reference_level);
      wire::put_u32(out, m.n_t);
      wire::put_f64(out, m.dt);
      wire::put_f64(out, m.alpha);
      wire::put_f64(out, m.q_max);
      wire::put_f64(out, m.sigma);
      wire::put_u8(out, m.norm);
      wire::put_u16(out, m.n_e);
      wire::put_u64(out, m.basic_seed);
      wire::put_u8(out, m.strategy);
      for (double v : m.initial_state) wire::put_f64(out, v);
    }
    void operator()(const CertifyMessage& m) const { wire::put_u32(out, m.step); }
    void operator()(const FullUpdateMessage& m) const {
      if (m.state.empty()) throw ProtocolError("full update must carry a state");
      wire::put_u32(out, m.step);
      for (double v : m.state) wire::put_f64(out, v);
    }
    void operator()(const PartialUpdateMessage& m) const {
      detail::validate_pairs(m.pairs);
      wire::put_u32(out, m.step);
      wire::put_u32(out, static_cast<std::uint32_t>(m.pairs.size()));
      for (const auto& [pos, value] : m.pairs) {
        wire::put_u32(out, pos);
        wire::put_f64(out, value);
      }
    }
    void operator()(const StreamStateMessage& m) const {
      if (m.state.empty()) throw ProtocolError("stream state must carry a state");
      wire::put_u32(out, m.step);
      for (double v : m.state) wire::put_f64(out, v);
    }
  };
  std::visit(Encoder{out}, msg);

  const std::uint32_t payload = static_cast<std::uint32_t>(out.size() - kFrameHeaderBytes);
  out[1] = static_cast<std::uint8_t>(payload);
  out[2] = static_cast<std::uint8_t>(payload >> 8);
  out[3] = static_cast<std::uint8_t>(payload >> 16);
  out[4] = static_cast<std::uint8_t>(payload >> 24);
  return out;
}

struct DecodeResult {
  Message message;
  std::size_t consumed = 0;
};

/// Decodes one frame from the front of `bytes`. Returns nullopt when the
/// frame is still incomplete; throws ProtocolError on malformed data.
inline std::optional<DecodeResult> decode(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < kFrameHeaderBytes) return std::nullopt;
  const std::uint8_t type = bytes[0];
  const std::uint32_t payload_len = static_cast<std::uint32_t>(bytes[1]) |
                                    (static_cast<std::uint32_t>(bytes[2]) << 8) |
                                    (static_cast<std::uint32_t>(bytes[3]) << 16) |
                                    (static_cast<std::uint32_t>(bytes[4]) << 24);
  if (payload_len > kMaxPayloadBytes) throw ProtocolError("payload length exceeds cap");
  if (bytes.size() < kFrameHeaderBytes + payload_len) return std::nullopt;

  wire::Reader r(bytes.subspan(kFrameHeaderBytes, payload_len));
  Message msg;
  switch (type) {
    case 0: {
      InitMessage m;
      m.surrogate_level = r.u8();
      m.reference_level = r.u8();
      m.n_t = r.u32();
      m.dt = r.f64();
      m.alpha = r.f64();
      m.q_max = r.f64();
      m.sigma = r.f64();
      m.norm = r.u8();
      m.n_e = r.u16();
      m.basic_seed = r.u64();
      m.strategy = r.u8();
      if (r.remaining() % 8 != 0) throw ProtocolError("init state bytes not a multiple of 8");
      m.initial_state.resize(r.remaining() / 8);
      for (double& v : m.initial_state) v = r.f64();
      detail::validate_init(m);
      msg = std::move(m);
      break;
    }
    case 1: {
      CertifyMessage m;
      m.step = r.u32();
      msg = m;
      break;
    }
    case 2: {
      FullUpdateMessage m;
      m.step = r.u32();
      if (r.remaining() % 8 != 0 || r.remaining() == 0) {
        throw ProtocolError("full update state malformed");
      }
      m.state.resize(r.remaining() / 8);
      for (double& v : m.state) v = r.f64();
      msg = std::move(m);
      break;
    }
    case 3: {
      PartialUpdateMessage m;
      m.step = r.u32();
      const std::uint32_t count = r.u32();
      if (count == 0) throw ProtocolError("partial update requires at least one pair");
      if (r.remaining() != static_cast<std::size_t>(count) * 12) {
        throw ProtocolError("partial update length mismatch");
      }
      m.pairs.resize(count);
      for (auto& [pos, value] : m.pairs) {
        pos = r.u32();
        value = r.f64();
      }
      detail::validate_pairs(m.pairs);
      msg = std::move(m);
      break;
    }
    case 4: {
      StreamStateMessage m;
      m.step = r.u32();
      if (r.remaining() % 8 != 0 || r.remaining() == 0) {
        throw ProtocolError("stream state malformed");
      }
      m.state.resize(r.remaining() / 8);
      for (double& v : m.state) v = r.f64();
      msg = std::move(m);
      break;
    }
    default:
      throw ProtocolError("unknown message type " + std::to_string(type));
  }
  if (!r.done()) throw ProtocolError("trailing bytes in payload");
  return DecodeResult{std::move(msg), kFrameHeaderBytes + payload_len};
}

/// Incremental frame assembly for byte-stream transports.
class FrameReader {
 public:
  void feed(std::span<const std::uint8_t> bytes) {
    buffer_.insert(buffer_.end(), bytes.begin(), bytes.end());
  }

  std::optional<Message> next() {
    auto result = decode(buffer_);
    if (!result) return std::nullopt;
    buffer_.erase(buffer_.begin(), buffer_.begin() + static_cast<std::ptrdiff_t>(result->consumed));
    return std::move(result->message);
  }

  std::size_t buffered() const { return buffer_.size(); }

 private:
  std::vector<std::uint8_t> buffer_;
};

}  // namespace simsync
