#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include "pgasim/errors.hpp"

namespace pgasim {

inline constexpr std::uint8_t kWireVersion = 0x01;
inline constexpr std::size_t kMaxArgs = 16;

/// Encoded message header size: 32-byte fixed part plus a 64-byte args
/// region, always present regardless of arg_count.
inline constexpr std::size_t kHeaderBytes = 96;

/// Per-packet framing carried for correctness: seq(8) index(4) count(4)
/// frag_len(2). Link timing charges a separate calibrated overhead instead.
inline constexpr std::size_t kPacketFramingBytes = 18;

enum class MessageKind : std::uint8_t { Request = 0, Reply = 1 };
enum class Variant : std::uint8_t { Short = 0, Medium = 1, Long = 2 };

struct MessageHeader {
  std::uint8_t version = kWireVersion;
  MessageKind kind = MessageKind::Request;
  Variant variant = Variant::Short;
  std::uint8_t opcode = 0;
  std::uint16_t src = 0;
  std::uint16_t dst = 0;
  std::uint8_t flags = 0;
  std::uint32_t payload_len = 0;
  std::uint64_t dest_offset = 0;  // Long only, else 0
  std::uint64_t token = 0;
  std::uint8_t arg_count = 0;
  std::array<std::uint32_t, kMaxArgs> args{};

  void set_args(std::initializer_list<std::uint32_t> values) {
    args.fill(0);
    arg_count = 0;
    for (std::uint32_t v : values) args[arg_count++] = v;
  }

  bool operator==(const MessageHeader&) const = default;
};

/// Fixed-MTU framing unit. `body` holds a contiguous slice of the encoded
/// message (header bytes first, then payload).
struct Packet {
  std::uint64_t seq = 0;
  std::uint32_t index = 0;
  std::uint32_t count = 1;
  std::uint16_t frag_len = 0;
  std::vector<std::uint8_t> body;

  bool operator==(const Packet&) const = default;
};

using Bytes = std::vector<std::uint8_t>;
using ByteView = std::span<const std::uint8_t>;

/// Serializes header + payload into the deterministic little-endian wire
/// image. Throws TooManyArgs / PayloadMismatch.
Bytes encode_message(const MessageHeader& header, ByteView payload);

/// Inverse of encode_message. Throws Truncated / BadVersion.
std::pair<MessageHeader, Bytes> decode_message(ByteView bytes);

/// Splits an encoded message into packets of at most `mtu_payload` body
/// bytes. The header must fit in the first packet (mtu >= 96).
std::vector<Packet> packetize(ByteView message, std::uint32_t mtu_payload,
                              std::uint64_t seq);

/// Concatenates the bodies of one message's packets, checking order and seq
/// consistency. Throws GapDetected / MixedSeq.
Bytes reassemble(std::span<const Packet> packets);

/// reassemble followed by decode_message.
std::pair<MessageHeader, Bytes> reassemble_message(std::span<const Packet> packets);

/// Packet framing codec used verbatim by the stream-socket transport.
Bytes encode_packet(const Packet& packet);
Packet decode_packet(ByteView bytes);

/// ceil((kHeaderBytes + payload_len) / mtu): the packet-count law.
std::uint64_t packet_count(std::uint64_t payload_len, std::uint32_t mtu_payload);

}  // namespace pgasim
