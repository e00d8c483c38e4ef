#include "doctest.h"

#include "fdx/core/error.hpp"
#include "support/service_scenarios.hpp"

#include <cstdlib>
#include <fstream>

using namespace fdx;
using namespace fdx::service;

namespace {

ErrorCode code_of(auto&& f) {
    try {
        f();
    } catch (const Error& e) {
        return e.code();
    }
    FAIL("expected an fdx::Error");
    return ErrorCode::InvalidArgument;
}

std::string error_text(auto&& f) {
    try {
        f();
    } catch (const Error& e) {
        return e.what();
    }
    return {};
}

struct RunningServer {
    Server server;
    unsigned short port;

    explicit RunningServer(ServeOptions opt = {}, std::shared_ptr<const runtime::Params> p = testing::untrained_default_model())
        : server(std::move(p), [&] {
              opt.port = 0;
              return opt;
          }()),
          port(server.start()) {}
};

WireMessage msg(Body b) { return WireMessage{kProtocolVersion, std::move(b)}; }

} // namespace

TEST_CASE("messages encode with v and kind first") {
    CHECK(encode_message(msg(TickIn{0, 0, std::nullopt, false})) == R"({"v":"1","kind":"TickIn","frame":0,"listen":0})");
    CHECK(encode_message(msg(TickIn{3, 9, 2, true})) ==
          R"({"v":"1","kind":"TickIn","frame":3,"listen":9,"scene":2,"barge_in":true})");
    CHECK(encode_message(msg(End{})) == R"({"v":"1","kind":"End"})");
    CHECK(encode_message(msg(TickOut{4, 1, 2, 3, "overlap", 0})) ==
          R"({"v":"1","kind":"TickOut","frame":4,"speak":1,"text":2,"action":3,"mode":"overlap","tick_wall_time":0})");
    CHECK(encode_message(msg(ErrorMessage{"too_many_sessions", "full"})) ==
          R"({"v":"1","kind":"Error","code":"too_many_sessions","message":"full"})");
}

TEST_CASE("decode inverts encode on random messages") {
    Rng rng(2024);
    for (int i = 0; i < 1000; ++i) {
        const auto m = testing::random_message(rng);
        const auto bytes = encode_message(m);
        CHECK(decode_message(bytes) == m);
        CHECK(encode_message(decode_message(bytes)) == bytes);
    }
}

TEST_CASE("malformed input") {
    const std::string good = encode_message(msg(TickIn{1, 2, std::nullopt, false}));
    const auto truncated = good.substr(0, good.size() - 3);
    CHECK(code_of([&] { decode_message(truncated); }) == ErrorCode::MalformedMessage);
    CHECK(error_text([&] { decode_message(truncated); }).find("at byte " + std::to_string(truncated.size())) !=
          std::string::npos);
    CHECK(error_text([] { decode_message(R"({"v":1x})"); }).find("at byte 6") != std::string::npos);
    CHECK(code_of([] { decode_message("[1,2]"); }) == ErrorCode::MalformedMessage);
    CHECK(code_of([] { decode_message(R"({"v":"1","kind":"Nope"})"); }) == ErrorCode::MalformedMessage);
    CHECK(code_of([] { decode_message(R"({"v":"1","kind":"TickIn","frame":0})"); }) == ErrorCode::MalformedMessage);
    CHECK(code_of([] { decode_message(R"({"v":"1","kind":"TickIn","frame":"0","listen":0})"); }) ==
          ErrorCode::MalformedMessage);
    CHECK(code_of([] { decode_message(R"({"kind":"End"})"); }) == ErrorCode::MalformedMessage);
}

TEST_CASE("bind addresses") {
    ServeOptions opt;
    parse_bind("0.0.0.0:9000", opt);
    CHECK(opt.address == "0.0.0.0");
    CHECK(opt.port == 9000);
    CHECK(code_of([&] { parse_bind("nohost", opt); }) == ErrorCode::InvalidArgument);
    CHECK(code_of([&] { parse_bind("h:70000", opt); }) == ErrorCode::InvalidArgument);
    ::setenv("FDX_BIND", "127.0.0.2:7001", 1);
    apply_bind_override(opt);
    ::unsetenv("FDX_BIND");
    CHECK(opt.address == "127.0.0.2");
    CHECK(opt.port == 7001);
    ServeOptions bad;
    bad.default_mode = "sometimes";
    CHECK(code_of([&] { bad.validate(); }) == ErrorCode::InvalidArgument);
}

TEST_CASE("handshake and lockstep contract") {
    RunningServer rs;
    SUBCASE("16 TickIn give 16 TickOut and Metrics on End") {
        Client c("127.0.0.1", rs.port);
        c.send(msg(Hello{}));
        const auto ready = c.receive();
        REQUIRE(std::holds_alternative<Ready>(ready.body));
        const auto& r = std::get<Ready>(ready.body);
        CHECK(r.mode == "lockstep");
        CHECK(r.vocab == model::ModelConfig{}.vocab);
        CHECK(r.max_frames == 512);
        for (int f = 0; f < 16; ++f) {
            c.send(msg(TickIn{f, f < 6 ? 20 + f : 0, std::nullopt, false}));
            const auto out = c.receive();
            REQUIRE(std::holds_alternative<TickOut>(out.body));
            CHECK(std::get<TickOut>(out.body).frame == f);
            CHECK(std::get<TickOut>(out.body).tick_wall_time == 0);
        }
        c.send(msg(End{}));
        const auto m = c.receive();
        REQUIRE(std::holds_alternative<Metrics>(m.body));
        CHECK(std::get<Metrics>(m.body).overrun_count == 0);
        CHECK_FALSE(c.try_receive_raw().has_value());
    }
    SUBCASE("unsupported version") {
        Client c("127.0.0.1", rs.port);
        Hello h;
        h.protocol = "2";
        c.send(msg(h));
        const auto e = c.receive();
        REQUIRE(std::holds_alternative<ErrorMessage>(e.body));
        CHECK(std::get<ErrorMessage>(e.body).code == "unsupported_version");
        Client d("127.0.0.1", rs.port);
        d.send_raw(R"({"v":"9","kind":"End"})");
        CHECK(std::get<ErrorMessage>(d.receive().body).code == "unsupported_version");
    }
    SUBCASE("protocol violations close the connection with an Error") {
        Client a("127.0.0.1", rs.port);
        a.send(msg(TickIn{0, 0, std::nullopt, false}));
        CHECK(std::get<ErrorMessage>(a.receive().body).code == "protocol_error");
        CHECK_FALSE(a.try_receive_raw().has_value());

        Client b("127.0.0.1", rs.port);
        b.send(msg(Hello{}));
        b.receive();
        b.send(msg(TickIn{5, 0, std::nullopt, false}));
        CHECK(std::get<ErrorMessage>(b.receive().body).code == "protocol_error");

        Client c("127.0.0.1", rs.port);
        c.send_raw("{\"v\":\"1\",\"kind\":");
        CHECK(std::get<ErrorMessage>(c.receive().body).code == "malformed_message");

        Client d("127.0.0.1", rs.port);
        Hello h;
        h.checkpoint = "elsewhere";
        d.send(msg(h));
        CHECK(std::get<ErrorMessage>(d.receive().body).code == "unknown_checkpoint");

        Client e("127.0.0.1", rs.port);
        e.send(msg(Hello{}));
        e.receive();
        e.send(msg(TickIn{0, 64, std::nullopt, false}));
        CHECK(std::get<ErrorMessage>(e.receive().body).code == "invalid_argument");
    }
}

TEST_CASE("session limit") {
    ServeOptions opt;
    opt.max_sessions = 1;
    RunningServer rs(opt);
    Client a("127.0.0.1", rs.port);
    a.send(msg(Hello{}));
    REQUIRE(std::holds_alternative<Ready>(a.receive().body));
    Client b("127.0.0.1", rs.port);
    b.send(msg(Hello{}));
    CHECK(std::get<ErrorMessage>(b.receive().body).code == "too_many_sessions");
    a.send(msg(End{}));
    a.receive();
    CHECK_FALSE(a.try_receive_raw().has_value());
    for (int i = 0; i < 100 && rs.server.active_sessions() > 0; ++i)
        std::this_thread::sleep_for(std::chrono::milliseconds(10));
    Client c("127.0.0.1", rs.port);
    c.send(msg(Hello{}));
    CHECK(std::holds_alternative<Ready>(c.receive().body));
}

TEST_CASE("lockstep sessions match the library and each other") {
    RunningServer rs;
    const auto feed = testing::barge_in_feed(5);
    const auto t = run_lockstep_client("127.0.0.1", rs.port, testing::golden_hello(), feed);
    runtime::RunOptions opt;
    opt.seed = 7;
    opt.policy = model::SamplingPolicy::temperature(1.0, 7);
    const auto solo = runtime::run_scripted_session(testing::untrained_default_model(), feed, runtime::ClockMode::Lockstep, opt);
    REQUIRE(t.ticks.size() == solo.trace.size());
    for (std::size_t f = 0; f < t.ticks.size(); ++f) CHECK(t.ticks[f] == to_wire(solo.trace[f]));
    REQUIRE(t.metrics.has_value());
    CHECK(t.metrics->barge_in_response_frames == solo.duplex.barge_in_response_frames);
    CHECK(t.metrics->turn_take_latency_frames == solo.duplex.turn_take_latency_frames);
    CHECK(testing::concurrent_clients_isolated(8, rs.port));
}

TEST_CASE("golden lockstep transcript") {
    const std::string path = std::string(FDX_GOLDEN_DIR) + "/lockstep_transcript.jsonl";
    const auto first = testing::golden_transcript();
    CHECK(testing::golden_transcript() == first);
    if (std::getenv("FDX_UPDATE_GOLDEN")) {
        std::ofstream(path, std::ios::binary) << first;
        MESSAGE("golden transcript rewritten");
    }
    CHECK(testing::read_file(path) == first);
}

TEST_CASE("realtime sessions keep the frame clock without input") {
    ServeOptions opt;
    opt.frame_ms = 40;
    RunningServer rs(opt);
    const auto c = testing::realtime_cadence(rs.port, 40);
    CHECK(c.ticks == 40);
    CHECK(c.mean_gap_ms == doctest::Approx(40).epsilon(0.1));
    CHECK(c.jitter_ms < 10);
    CHECK(c.overruns == 0);
}
