#include <gtest/gtest.h>

#include <chrono>
#include <future>
#include <thread>

#include "anicurate/error.hpp"
#include "anicurate/providers.hpp"
#include "support.hpp"

using namespace anicurate;
using namespace anicurate::providers;
namespace t = anicurate::testing;

namespace {

std::string ref_exec(const std::string& extra = "") {
  return std::string("exec:") + ANICURATE_REF_PROVIDER + (extra.empty() ? "" : " " + extra);
}

Request embed_text_request(std::int64_t id, const std::string& text) {
  return Request{id, op::kEmbedText, {{"text", text}}};
}

}  // namespace

TEST(Wire, RequestRoundTrip) {
  const Request r{7, op::kEmbedText, {{"text", "hello"}}};
  const auto line = encode_request(r);
  EXPECT_EQ(line.back(), '\n');
  EXPECT_EQ(std::count(line.begin(), line.end(), '\n'), 1);
  const auto back = decode_request(line);
  EXPECT_EQ(back.id, 7);
  EXPECT_EQ(back.op, "embed_text");
  EXPECT_EQ(back.payload, r.payload);
}

TEST(Wire, ResponseRoundTrip) {
  const Response ok{3, true, {{"score", 0.5}}, ""};
  const auto b = decode_response(encode_response(ok));
  EXPECT_TRUE(b.ok);
  EXPECT_EQ(b.result.at("score"), 0.5);
  const Response bad{4, false, json::object(), "boom"};
  const auto c = decode_response(encode_response(bad));
  EXPECT_FALSE(c.ok);
  EXPECT_EQ(c.error, "boom");
}

TEST(Wire, MalformedIsProtocolError) {
  EXPECT_THROW(decode_response("{not json"), ProtocolError);
  EXPECT_THROW(decode_response(R"({"id": 1})"), ProtocolError);
  EXPECT_THROW(decode_response(R"({"id": "x", "ok": true, "result": {}})"), ProtocolError);
  EXPECT_THROW(decode_response(R"({"id": 1, "ok": false})"), ProtocolError);
  EXPECT_THROW(decode_request(R"({"id": 1, "op": 5, "payload": {}})"), ProtocolError);
  EXPECT_THROW(decode_request(R"([1, 2])"), ProtocolError);
}

TEST(Wire, Base64) {
  const std::string s = "any carnal pleas";
  const std::vector<std::uint8_t> bytes(s.begin(), s.end());
  EXPECT_EQ(base64_encode(bytes), "YW55IGNhcm5hbCBwbGVhcw==");
  EXPECT_EQ(base64_decode("YW55IGNhcm5hbCBwbGVhcw=="), bytes);
  EXPECT_EQ(base64_encode({}), "");
  EXPECT_THROW(base64_decode("@@@@"), ProtocolError);
}

TEST(Wire, FrameAndMaskRoundTrip) {
  const auto f = t::noise_frame(7, 5, 2);
  EXPECT_EQ(frame_from_json(frame_to_json(f)), f);
  media::BinaryMask m(9, 3);
  m.set(0, 0, true);
  m.set(8, 2, true);
  m.set(4, 1, true);
  EXPECT_EQ(mask_from_json(mask_to_json(m)), m);
}

TEST(Embedding, CosineAndNormalize) {
  Embedding a{{3, 4}};
  a.normalize();
  EXPECT_NEAR(a.norm(), 1.0, 1e-6);
  EXPECT_NEAR(cosine(a, Embedding{{-3, -4}}), -1.0, 1e-6);
  Embedding z{{0, 0}};
  EXPECT_THROW(z.normalize(), Error);
  EXPECT_THROW(cosine(a, Embedding{{1, 2, 3}}), ShapeError);
}

TEST(Reference, DistinctHuesAreOrthogonal) {
  const ReferenceProvider p;
  const auto red = p.embed_image(t::solid(16, 16, {255, 0, 0}));
  const auto blue = p.embed_image(t::solid(16, 16, {0, 0, 255}));
  EXPECT_NEAR(red.norm(), 1.0, 1e-6);
  EXPECT_NEAR(cosine(red, blue), 0.0, 1e-9);
  EXPECT_NEAR(cosine(red, p.embed_image(t::solid(4, 4, {255, 0, 0}))), 1.0, 1e-6);
}

TEST(Reference, VideoMotionChannel) {
  const ReferenceProvider p;
  const auto still = p.embed_video(t::constant_video(32, 32, 8, {10, 200, 10}));
  ASSERT_EQ(still.dim(), 65u);
  EXPECT_EQ(still.values.back(), 0.0f);
  const auto tex = t::texture(64, 64, 4);
  std::vector<media::Frame> frames;
  for (int i = 0; i < 9; ++i) frames.push_back(t::shifted(tex, 2 * i, 0));
  const auto moving = p.embed_video(media::FrameSequence(frames, {8, 1}));
  EXPECT_GT(moving.values.back(), 0.0f);
  EXPECT_NEAR(moving.norm(), 1.0, 1e-6);
}

TEST(Reference, TextEmbeddingDeterministic) {
  const ReferenceProvider p;
  const auto a = p.embed_text("a cat jumps"), b = p.embed_text("a cat jumps");
  EXPECT_EQ(a.values, b.values);
  EXPECT_EQ(a.dim(), 65u);
  EXPECT_EQ(p.embed_text("x", 12).dim(), 12u);
  EXPECT_LT(cosine(a, p.embed_text("a dog sleeps")), 0.99);
}

TEST(Reference, CharMasks) {
  const ReferenceProvider p;
  EXPECT_TRUE(p.char_masks(t::solid(32, 32, {100, 100, 100})).empty());

  media::Frame one(64, 64, media::Rgb{30, 30, 30});
  t::fill_rect(one, 20, 20, 12, 10, {230, 60, 40});
  const auto m1 = p.char_masks(one);
  ASSERT_EQ(m1.size(), 1u);
  EXPECT_NEAR(static_cast<double>(m1[0].popcount()), 120.0, 12.0);

  media::Frame two(64, 64, media::Rgb{30, 30, 30});
  t::fill_rect(two, 4, 4, 8, 8, {230, 60, 40});
  t::fill_rect(two, 40, 40, 10, 10, {40, 220, 60});
  const auto m2 = p.char_masks(two);
  ASSERT_EQ(m2.size(), 2u);
  for (std::size_t i = 0; i < 64 * 64; ++i) {
    const int x = static_cast<int>(i % 64), y = static_cast<int>(i / 64);
    EXPECT_FALSE(m2[0].get(x, y) && m2[1].get(x, y));
  }
}

TEST(Reference, HandleNeverThrows) {
  const ReferenceProvider p;
  const auto r = p.handle(Request{5, "no_such_op", json::object()});
  EXPECT_FALSE(r.ok);
  EXPECT_EQ(r.id, 5);
  EXPECT_FALSE(p.handle(Request{6, op::kEmbedImage, json::object()}).ok);
}

TEST(InProcess, ScoresAndIds) {
  ModelClient client(make_endpoint("ref"));
  const auto e = client.embed_image(t::solid(8, 8, {255, 255, 0}));
  EXPECT_NEAR(client.score_regression(e, e), 1.0, 1e-6);
  const double a = client.score_aesthetic(e);
  EXPECT_GE(a, 0.0);
  EXPECT_LE(a, 1.0);
  EXPECT_FALSE(client.caption(json{{"id", "c1"}}).empty());
}

TEST(InProcess, IdMismatchIsProtocolError) {
  InProcessEndpoint ep([](const Request& q) { return Response{q.id + 1, true, json::object(), ""}; });
  EXPECT_THROW(call_provider(ep, embed_text_request(1, "x")), ProtocolError);
}

TEST(InProcess, ProviderFailureSurfaces) {
  ModelClient client(std::make_shared<InProcessEndpoint>(
      [](const Request& q) { return Response{q.id, false, json::object(), "model offline"}; }));
  try {
    client.embed_text("x");
    FAIL();
  } catch (const ProviderError& e) {
    EXPECT_NE(std::string(e.what()).find("model offline"), std::string::npos);
  }
}

TEST(InProcess, RolesRouteIndependently) {
  int hits = 0;
  ModelClient client(make_endpoint("ref"));
  client.set(Role::kCaptioner, std::make_shared<InProcessEndpoint>([&](const Request& q) {
               ++hits;
               return Response{q.id, true, {{"caption", "custom"}}, ""};
             }));
  EXPECT_EQ(client.caption(json{{"id", "a"}}), "custom");
  client.embed_text("not routed to the captioner");
  EXPECT_EQ(hits, 1);
  EXPECT_TRUE(client.has(Role::kCaptioner));
  EXPECT_EQ(client.endpoint(Role::kSegmenter).describe(), "ref");
}

TEST(Roles, NamesRoundTrip) {
  for (Role r : all_roles()) EXPECT_EQ(role_from_name(role_name(r)), r);
  EXPECT_FALSE(role_from_name("nope"));
  EXPECT_EQ(role_for_op(op::kCharMasks), Role::kSegmenter);
}

TEST(Endpoints, UnknownSpecIsConfigError) { EXPECT_THROW(make_endpoint("grpc:x"), ConfigError); }

TEST(Subprocess, MatchesInProcess) {
  ModelClient local(make_endpoint("ref"));
  ModelClient remote(make_endpoint(ref_exec()));
  const auto f = t::noise_frame(16, 12, 3);
  EXPECT_EQ(local.embed_image(f).values, remote.embed_image(f).values);
  EXPECT_EQ(local.embed_text("hi").values, remote.embed_text("hi").values);
  const auto video = VideoRef::from_sequence(t::sprite_video(32, 32, 6, 2, 2, 8, 8, 2, 1));
  EXPECT_EQ(local.embed_video(video).values, remote.embed_video(video).values);
  EXPECT_EQ(local.score_smoothness(video), remote.score_smoothness(video));
}

TEST(Subprocess, HangTimesOut) {
  CallOptions opts;
  opts.timeout = std::chrono::milliseconds(300);
  opts.retries = 0;
  auto ep = make_endpoint(ref_exec("--fault hang"), opts);
  const auto start = std::chrono::steady_clock::now();
  EXPECT_THROW(call_provider(*ep, embed_text_request(1, "x")), TransportError);
  EXPECT_LT(std::chrono::steady_clock::now() - start, std::chrono::seconds(5));
}

TEST(Subprocess, GarbageIsProtocolError) {
  auto ep = make_endpoint(ref_exec("--fault garbage"));
  EXPECT_THROW(call_provider(*ep, embed_text_request(1, "x")), ProtocolError);
}

TEST(Subprocess, ExitIsTransportErrorThenRestarts) {
  CallOptions opts;
  opts.retries = 0;
  auto ep = make_endpoint(ref_exec("--fault exit --fault-at 2"), opts);
  EXPECT_TRUE(call_provider(*ep, embed_text_request(1, "x")).ok);
  EXPECT_THROW(call_provider(*ep, embed_text_request(2, "x")), TransportError);
  // A fresh child answers the next call (its fault counter restarts at 1).
  EXPECT_TRUE(call_provider(*ep, embed_text_request(3, "x")).ok);
}

TEST(Subprocess, WrongIdIsProtocolError) {
  auto ep = make_endpoint(ref_exec("--fault wrong-id"));
  EXPECT_THROW(call_provider(*ep, embed_text_request(1, "x")), ProtocolError);
}

TEST(Subprocess, MissingBinaryIsTransportError) {
  CallOptions opts;
  opts.retries = 0;
  auto ep = make_endpoint("exec:/nonexistent/provider-binary", opts);
  EXPECT_THROW(call_provider(*ep, embed_text_request(1, "x")), TransportError);
}

TEST(Tcp, ServeAndCall) {
  const ReferenceProvider provider;
  std::promise<int> port_promise;
  auto port_future = port_promise.get_future();
  std::thread server([&] { serve_tcp(provider, 0, 1, [&](int p) { port_promise.set_value(p); }); });
  const int port = port_future.get();
  {
    ModelClient remote(make_endpoint("tcp:127.0.0.1:" + std::to_string(port)));
    ModelClient local(make_endpoint("ref"));
    EXPECT_EQ(remote.embed_text("tcp").values, local.embed_text("tcp").values);
    EXPECT_EQ(remote.caption(json{{"id", "z"}}), local.caption(json{{"id", "z"}}));
  }
  server.join();
}

TEST(Tcp, RefusedIsTransportError) {
  CallOptions opts;
  opts.retries = 0;
  opts.timeout = std::chrono::milliseconds(500);
  auto ep = make_endpoint("tcp:127.0.0.1:1", opts);
  EXPECT_THROW(call_provider(*ep, embed_text_request(1, "x")), TransportError);
}

TEST(Conformance, ReferencePasses) {
  auto ep = make_endpoint("ref");
  const auto rep = conformance_check(*ep);
  EXPECT_TRUE(rep.failures.empty()) << rep.failures.front();
  EXPECT_EQ(rep.lines.size(), known_ops().size() + 1);  // plus the error-reporting probe
}

TEST(Conformance, BrokenProviderFails) {
  InProcessEndpoint ep([](const Request& q) { return Response{q.id, true, {{"unexpected", 1}}, ""}; });
  const auto rep = conformance_check(ep);
  EXPECT_EQ(rep.failures.size(), known_ops().size() + 1);
}
