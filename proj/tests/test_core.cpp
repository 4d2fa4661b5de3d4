#include <doctest.h>

#include <vector>

#include "pgasim/core.hpp"

using namespace pgasim;

namespace {

struct CoreFixture {
  NodeMemory memory{SegmentLayout{64 * 1024, 64 * 1024}, 4096};
  NodeCore core{0, 4, &memory, CoreConfig{}};
  DispatchHooks hooks;
  std::vector<std::pair<ErrorCode, std::string>> errors;

  CoreFixture() {
    hooks.protocol_error = [this](ErrorCode c, const std::string& m) {
      errors.emplace_back(c, m);
    };
  }
};

Command make_put(NodeId dst, std::uint64_t dest_off, std::uint64_t src_off,
                 std::uint64_t len) {
  Command c;
  c.kind = CommandKind::Put;
  c.dst = dst;
  c.variant = Variant::Long;
  c.dest_offset = dest_off;
  c.payload = SourceDesc{Region::Shared, src_off, len};
  return c;
}

}  // namespace

TEST_CASE("submit enqueues on the host queue") {
  CoreFixture f;
  f.core.submit(TxQueue::Host, make_put(1, 0, 0, 64));
  CHECK(f.core.queue_depth(TxQueue::Host) == 1);
  CHECK(f.core.queue_depth(TxQueue::Reply) == 0);
}

TEST_CASE("bounded queues reject the 65th command") {
  CoreFixture f;
  for (int i = 0; i < 64; ++i) f.core.submit(TxQueue::Host, make_put(1, 0, 0, 8));
  try {
    f.core.submit(TxQueue::Host, make_put(1, 0, 0, 8));
    FAIL("expected QueueFull");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::QueueFull);
  }
}

TEST_CASE("reply without a token context is rejected") {
  CoreFixture f;
  Command c;
  c.kind = CommandKind::AmReply;
  c.dst = 1;
  c.opcode = kOpPut;
  c.token = 0;
  try {
    f.core.submit(TxQueue::Reply, c);
    FAIL("expected BadCommand");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::BadCommand);
  }
}

TEST_CASE("reply to a node other than the requester is rejected") {
  CoreFixture f;
  Command c;
  c.kind = CommandKind::AmReply;
  c.dst = 2;
  c.opcode = kOpPut;
  c.token = (static_cast<std::uint64_t>(1) << 48) | 7;  // minted by rank 1
  try {
    f.core.submit(TxQueue::Reply, c);
    FAIL("expected ReplyToNonRequester");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::ReplyToNonRequester);
  }
}

TEST_CASE("round-robin grants replies first, then rotates without starvation") {
  CoreFixture f;
  Command a = make_put(1, 0, 0, 8);
  a.opcode = 10;
  Command b = make_put(1, 0, 0, 8);
  b.opcode = 11;
  f.core.submit(TxQueue::Host, a);
  f.core.submit(TxQueue::Host, b);
  Command r;
  r.kind = CommandKind::AmReply;
  r.dst = 1;
  r.variant = Variant::Long;
  r.opcode = kOpPut;
  r.token = (static_cast<std::uint64_t>(1) << 48) | 3;
  r.payload = SourceDesc{Region::Shared, 0, 8};
  f.core.submit(TxQueue::Reply, r);

  auto g1 = f.core.schedule_next();
  auto g2 = f.core.schedule_next();
  auto g3 = f.core.schedule_next();
  REQUIRE(g1);
  REQUIRE(g2);
  REQUIRE(g3);
  CHECK(g1->kind == CommandKind::AmReply);
  CHECK(g2->opcode == 10);
  CHECK(g3->opcode == 11);
  CHECK_FALSE(f.core.schedule_next());
}

TEST_CASE("three queues with three commands each drain within nine grants") {
  CoreFixture f;
  for (int i = 0; i < 3; ++i) {
    f.core.submit(TxQueue::Host, make_put(1, 0, 0, 8));
    f.core.submit(TxQueue::Compute, make_put(1, 0, 0, 8));
    Command r;
    r.kind = CommandKind::AmReply;
    r.dst = 1;
    r.variant = Variant::Long;
    r.opcode = kOpPut;
    r.token = (static_cast<std::uint64_t>(1) << 48) | static_cast<std::uint64_t>(i + 1);
    r.payload = SourceDesc{Region::Shared, 0, 8};
    f.core.submit(TxQueue::Reply, r);
  }
  int grants = 0;
  while (f.core.schedule_next()) ++grants;
  CHECK(grants == 9);
  CHECK(f.core.queues_empty());
}

TEST_CASE("sequence builds a long PUT request with DMA-fetched payload") {
  CoreFixture f;
  const Bytes src(64, 0x2c);
  f.memory.dma_write(Region::Shared, 0x40, src);
  Command c = make_put(1, 0x100, 0x40, 64);
  c.token = f.core.make_token();
  const auto sm = f.core.sequence(c);
  CHECK(sm.header.kind == MessageKind::Request);
  CHECK(sm.header.variant == Variant::Long);
  CHECK(sm.header.opcode == kOpPut);
  CHECK(sm.header.src == 0);
  CHECK(sm.header.dst == 1);
  CHECK(sm.header.payload_len == 64);
  CHECK(sm.header.dest_offset == 0x100);
  CHECK(sm.payload == src);
  CHECK(sm.seq != 0);
}

TEST_CASE("sequence turns a get into a short GET request") {
  CoreFixture f;
  Command c;
  c.kind = CommandKind::Get;
  c.dst = 2;
  c.get = GetDesc{0x80, 128, Region::Shared, 0x200};
  c.token = f.core.make_token();
  const auto sm = f.core.sequence(c);
  CHECK(sm.header.variant == Variant::Short);
  CHECK(sm.header.opcode == kOpGet);
  CHECK(sm.header.payload_len == 0);
  CHECK(sm.header.arg_count == 3);
  CHECK(sm.header.args[0] == 0x80);
  CHECK(sm.header.args[2] == 128);
}

TEST_CASE("sequence assigns distinct seqs and tokens never repeat") {
  CoreFixture f;
  std::uint64_t prev_seq = 0;
  std::uint64_t prev_token = 0;
  for (int i = 0; i < 100; ++i) {
    const std::uint64_t tok = f.core.make_token();
    CHECK(tok != prev_token);
    CHECK(token_requester(tok) == 0);
    prev_token = tok;
    auto sm = f.core.sequence(make_put(1, 0, 0, 1));
    CHECK(sm.seq != prev_seq);
    prev_seq = sm.seq;
  }
}

TEST_CASE("put with an out-of-bounds source is rejected at submit") {
  CoreFixture f;
  try {
    f.core.submit(TxQueue::Host, make_put(1, 0, 64 * 1024 - 8, 64));
    FAIL("expected OutOfBounds");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::OutOfBounds);
  }
}

TEST_CASE("put past the remote segment end is rejected") {
  CoreFixture f;
  try {
    f.core.submit(TxQueue::Host, make_put(1, 64 * 1024 - 8, 0, 64));
    FAIL("expected OutOfSegment");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::OutOfSegment);
  }
}

TEST_CASE("delivered PUT request writes the shared segment") {
  CoreFixture f;
  MessageHeader h;
  h.kind = MessageKind::Request;
  h.variant = Variant::Long;
  h.opcode = kOpPut;
  h.src = 1;
  h.dst = 0;
  h.dest_offset = 0x100;
  h.payload_len = 4;
  const Bytes payload{9, 8, 7, 6};
  f.core.deliver(h, payload, f.hooks, nullptr, 0);
  CHECK(f.memory.dma_read(Region::Shared, 0x100, 4) == payload);
  CHECK(f.errors.empty());
}

TEST_CASE("GET request enqueues exactly one PUT reply with the right bytes") {
  CoreFixture f;
  const Bytes data(128, 0x3e);
  f.memory.dma_write(Region::Shared, 0x40, data);

  MessageHeader h;
  h.kind = MessageKind::Request;
  h.variant = Variant::Short;
  h.opcode = kOpGet;
  h.src = 3;
  h.dst = 0;
  h.token = (static_cast<std::uint64_t>(3) << 48) | 5;
  h.set_args({0x40, 0, 128});
  f.core.deliver(h, {}, f.hooks, nullptr, 0);

  CHECK(f.core.queue_depth(TxQueue::Reply) == 1);
  auto reply = f.core.schedule_next();
  REQUIRE(reply);
  CHECK(reply->kind == CommandKind::AmReply);
  CHECK(reply->dst == 3);
  CHECK(reply->opcode == kOpPut);
  const auto sm = f.core.sequence(*reply);
  CHECK(sm.header.kind == MessageKind::Reply);
  CHECK(sm.header.token == h.token);
  CHECK(sm.header.payload_len == 128);
  CHECK(sm.payload == data);
}

TEST_CASE("PUT reply completes the matching pending get") {
  CoreFixture f;
  const std::uint64_t token = f.core.make_token();
  f.core.add_pending_get(token, GetDesc{0, 4, Region::Private, 0x10});
  bool completed = false;
  f.hooks.get_completed = [&](std::uint64_t t) {
    completed = t == token;
  };
  MessageHeader h;
  h.kind = MessageKind::Reply;
  h.variant = Variant::Long;
  h.opcode = kOpPut;
  h.src = 1;
  h.dst = 0;
  h.token = token;
  h.payload_len = 4;
  f.core.deliver(h, Bytes{1, 2, 3, 4}, f.hooks, nullptr, 0);
  CHECK(completed);
  CHECK(f.core.pending_get_count() == 0);
  CHECK(f.memory.dma_read(Region::Private, 0x10, 4) == Bytes{1, 2, 3, 4});
}

TEST_CASE("COMPUTE payload reaches memory before the compute scheduler") {
  CoreFixture f;
  Trace trace;
  trace.enable(true);
  bool seen = false;
  f.hooks.compute_submit = [&](std::span<const std::uint32_t> args,
                               std::optional<SourceDesc> at) {
    seen = true;
    REQUIRE(at.has_value());
    CHECK(args.size() == 2);
    // The payload must already be visible in the shared segment.
    CHECK(f.memory.dma_read(at->region, at->offset, at->len) == Bytes(1024, 0x44));
  };
  MessageHeader h;
  h.kind = MessageKind::Request;
  h.variant = Variant::Long;
  h.opcode = kOpCompute;
  h.src = 1;
  h.dst = 0;
  h.dest_offset = 0x400;
  h.payload_len = 1024;
  h.set_args({2, 0});
  f.core.deliver(h, Bytes(1024, 0x44), f.hooks, &trace, 7);
  CHECK(seen);
  CHECK(trace.count(TraceKind::HandlerBegin) == 1);
  CHECK(trace.count(TraceKind::HandlerEnd) == 1);
}

TEST_CASE("unknown opcode surfaces as a protocol error") {
  CoreFixture f;
  MessageHeader h;
  h.kind = MessageKind::Request;
  h.variant = Variant::Short;
  h.opcode = 0x7f;
  h.src = 1;
  h.dst = 0;
  f.core.deliver(h, {}, f.hooks, nullptr, 0);
  REQUIRE(f.errors.size() == 1);
  CHECK(f.errors[0].first == ErrorCode::UnknownOpcode);
}

TEST_CASE("handler registration honors the reserved range") {
  CoreFixture f;
  CHECK_NOTHROW(f.core.register_handler(0x80, [](HandlerContext&) {}));
  try {
    f.core.register_handler(0x01, [](HandlerContext&) {});
    FAIL("expected ReservedOpcode");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::ReservedOpcode);
  }
  try {
    f.core.register_handler(0x80, [](HandlerContext&) {});
    FAIL("expected AlreadyRegistered");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::AlreadyRegistered);
  }
}

TEST_CASE("medium payloads land in the private scratch ring") {
  CoreFixture f;
  std::optional<SourceDesc> where;
  f.core.register_handler(0x90, [&](HandlerContext& ctx) { where = ctx.payload(); });
  MessageHeader h;
  h.kind = MessageKind::Request;
  h.variant = Variant::Medium;
  h.opcode = 0x90;
  h.src = 1;
  h.dst = 0;
  h.payload_len = 256;
  f.core.deliver(h, Bytes(256, 0x7a), f.hooks, nullptr, 0);
  REQUIRE(where.has_value());
  CHECK(where->region == Region::Private);
  CHECK(where->offset >= f.memory.scratch_base());
  CHECK(f.memory.dma_read(Region::Private, where->offset, 256) == Bytes(256, 0x7a));
}

TEST_CASE("a handler may reply at most once, only to the requester") {
  CoreFixture f;
  f.core.register_handler(0x85, [&](HandlerContext& ctx) {
    ctx.reply_short(0x85, {1});
    try {
      ctx.reply_short(0x85, {2});
      FAIL("expected DuplicateReply");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::DuplicateReply);
    }
  });
  MessageHeader h;
  h.kind = MessageKind::Request;
  h.variant = Variant::Short;
  h.opcode = 0x85;
  h.src = 2;
  h.dst = 0;
  h.token = (static_cast<std::uint64_t>(2) << 48) | 9;
  f.core.deliver(h, {}, f.hooks, nullptr, 0);
  CHECK(f.core.queue_depth(TxQueue::Reply) == 1);
  auto reply = f.core.schedule_next();
  REQUIRE(reply);
  CHECK(reply->dst == 2);
  CHECK(reply->token == h.token);
}
