#include "pgasim/wire.hpp"

#include <algorithm>
#include <cstring>
#include <string>

namespace pgasim {

namespace {

void put_u16(Bytes& out, std::uint16_t v) {
  out.push_back(static_cast<std::uint8_t>(v & 0xff));
  out.push_back(static_cast<std::uint8_t>(v >> 8));
}

void put_u32(Bytes& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void put_u64(Bytes& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

std::uint16_t get_u16(ByteView in, std::size_t at) {
  return static_cast<std::uint16_t>(in[at] | (in[at + 1] << 8));
}

std::uint32_t get_u32(ByteView in, std::size_t at) {
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(in[at + i]) << (8 * i);
  return v;
}

std::uint64_t get_u64(ByteView in, std::size_t at) {
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(in[at + i]) << (8 * i);
  return v;
}

}  // namespace

Bytes encode_message(const MessageHeader& header, ByteView payload) {
  if (header.arg_count > kMaxArgs) {
    fail(ErrorCode::TooManyArgs,
         "arg_count " + std::to_string(header.arg_count) + " exceeds " +
             std::to_string(kMaxArgs));
  }
  if (payload.size() != header.payload_len) {
    fail(ErrorCode::PayloadMismatch,
         "payload size " + std::to_string(payload.size()) + " != payload_len " +
             std::to_string(header.payload_len));
  }
  if (header.variant == Variant::Short && header.payload_len != 0) {
    fail(ErrorCode::PayloadMismatch, "short message with nonzero payload_len");
  }

  Bytes out;
  out.reserve(kHeaderBytes + payload.size());
  out.push_back(header.version);
  out.push_back(static_cast<std::uint8_t>(header.kind));
  out.push_back(static_cast<std::uint8_t>(header.variant));
  out.push_back(header.opcode);
  put_u16(out, header.src);
  put_u16(out, header.dst);
  out.push_back(header.arg_count);
  out.push_back(header.flags);
  put_u16(out, 0);  // reserved
  put_u32(out, header.payload_len);
  put_u64(out, header.variant == Variant::Long ? header.dest_offset : 0);
  put_u64(out, header.token);
  for (std::size_t i = 0; i < kMaxArgs; ++i) {
    put_u32(out, i < header.arg_count ? header.args[i] : 0);
  }
  out.insert(out.end(), payload.begin(), payload.end());
  return out;
}

std::pair<MessageHeader, Bytes> decode_message(ByteView bytes) {
  if (bytes.size() < kHeaderBytes) {
    fail(ErrorCode::Truncated, "message shorter than the 96-byte header");
  }
  if (bytes[0] != kWireVersion) {
    fail(ErrorCode::BadVersion, "version byte " + std::to_string(bytes[0]));
  }
  MessageHeader h;
  h.version = bytes[0];
  if (bytes[1] > 1) fail(ErrorCode::Truncated, "bad message kind");
  h.kind = static_cast<MessageKind>(bytes[1]);
  if (bytes[2] > 2) fail(ErrorCode::Truncated, "bad variant");
  h.variant = static_cast<Variant>(bytes[2]);
  h.opcode = bytes[3];
  h.src = get_u16(bytes, 4);
  h.dst = get_u16(bytes, 6);
  h.arg_count = bytes[8];
  if (h.arg_count > kMaxArgs) fail(ErrorCode::TooManyArgs, "arg_count in header");
  h.flags = bytes[9];
  h.payload_len = get_u32(bytes, 12);
  h.dest_offset = get_u64(bytes, 16);
  h.token = get_u64(bytes, 24);
  for (std::size_t i = 0; i < h.arg_count; ++i) h.args[i] = get_u32(bytes, 32 + 4 * i);

  if (bytes.size() != kHeaderBytes + h.payload_len) {
    fail(ErrorCode::Truncated,
         "expected " + std::to_string(kHeaderBytes + h.payload_len) + " bytes, got " +
             std::to_string(bytes.size()));
  }
  Bytes payload(bytes.begin() + kHeaderBytes, bytes.end());
  return {h, std::move(payload)};
}

std::uint64_t packet_count(std::uint64_t payload_len, std::uint32_t mtu_payload) {
  const std::uint64_t total = kHeaderBytes + payload_len;
  return (total + mtu_payload - 1) / mtu_payload;
}

std::vector<Packet> packetize(ByteView message, std::uint32_t mtu_payload,
                              std::uint64_t seq) {
  if (mtu_payload < kHeaderBytes) {
    fail(ErrorCode::MtuTooSmall,
         "mtu " + std::to_string(mtu_payload) + " cannot hold the message header");
  }
  const std::uint64_t total = message.size();
  const std::uint32_t count =
      static_cast<std::uint32_t>((total + mtu_payload - 1) / mtu_payload);
  std::vector<Packet> out;
  out.reserve(count);
  for (std::uint32_t i = 0; i < count; ++i) {
    const std::uint64_t at = static_cast<std::uint64_t>(i) * mtu_payload;
    const std::uint16_t len =
        static_cast<std::uint16_t>(std::min<std::uint64_t>(mtu_payload, total - at));
    Packet p;
    p.seq = seq;
    p.index = i;
    p.count = count;
    p.frag_len = len;
    p.body.assign(message.begin() + at, message.begin() + at + len);
    out.push_back(std::move(p));
  }
  return out;
}

Bytes reassemble(std::span<const Packet> packets) {
  if (packets.empty()) fail(ErrorCode::GapDetected, "no packets");
  const std::uint64_t seq = packets.front().seq;
  const std::uint32_t count = packets.front().count;
  if (packets.size() != count) {
    fail(ErrorCode::GapDetected,
         "got " + std::to_string(packets.size()) + " of " + std::to_string(count) +
             " packets");
  }
  Bytes out;
  for (std::uint32_t i = 0; i < count; ++i) {
    const Packet& p = packets[i];
    if (p.seq != seq) {
      fail(ErrorCode::MixedSeq,
           "packet of seq " + std::to_string(p.seq) + " in stream of seq " +
               std::to_string(seq));
    }
    if (p.index != i || p.count != count) {
      fail(ErrorCode::GapDetected, "packet index " + std::to_string(p.index) +
                                       " where " + std::to_string(i) + " expected");
    }
    if (p.body.size() != p.frag_len) {
      fail(ErrorCode::Truncated, "frag_len does not match body size");
    }
    out.insert(out.end(), p.body.begin(), p.body.end());
  }
  return out;
}

std::pair<MessageHeader, Bytes> reassemble_message(std::span<const Packet> packets) {
  return decode_message(reassemble(packets));
}

Bytes encode_packet(const Packet& packet) {
  Bytes out;
  out.reserve(kPacketFramingBytes + packet.body.size());
  put_u64(out, packet.seq);
  put_u32(out, packet.index);
  put_u32(out, packet.count);
  put_u16(out, packet.frag_len);
  out.insert(out.end(), packet.body.begin(), packet.body.end());
  return out;
}

Packet decode_packet(ByteView bytes) {
  if (bytes.size() < kPacketFramingBytes) {
    fail(ErrorCode::Truncated, "packet shorter than its framing");
  }
  Packet p;
  p.seq = get_u64(bytes, 0);
  p.index = get_u32(bytes, 8);
  p.count = get_u32(bytes, 12);
  p.frag_len = get_u16(bytes, 16);
  if (bytes.size() != kPacketFramingBytes + p.frag_len) {
    fail(ErrorCode::Truncated, "packet body does not match frag_len");
  }
  p.body.assign(bytes.begin() + kPacketFramingBytes, bytes.end());
  return p;
}

}  // namespace pgasim
