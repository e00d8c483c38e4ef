#include "fdx/service/server.hpp"

#include "fdx/core/error.hpp"
#include "fdx/model/config.hpp"
#include "fdx/runtime/scripted.hpp"
#include "fdx/service/protocol.hpp"

#include <boost/asio.hpp>
#include <boost/beast/core.hpp>
#include <boost/beast/websocket.hpp>

#include <atomic>
#include <chrono>
#include <condition_variable>
#include <cstdlib>
#include <deque>
#include <mutex>
#include <thread>

namespace fdx::service {

namespace asio = boost::asio;
namespace beast = boost::beast;
namespace websocket = beast::websocket;
using tcp = asio::ip::tcp;

void ServeOptions::validate() const {
    if (max_sessions < 1) throw Error(ErrorCode::InvalidArgument, "max_sessions must be >= 1");
    if (frame_ms < 1) throw Error(ErrorCode::InvalidArgument, "frame_ms must be >= 1");
    runtime::parse_clock_mode(default_mode);
}

void parse_bind(const std::string& bind, ServeOptions& opt) {
    const auto colon = bind.rfind(':');
    if (colon == std::string::npos || colon == 0 || colon + 1 == bind.size())
        throw Error(ErrorCode::InvalidArgument, "bind address '" + bind + "' is not host:port");
    const std::string port = bind.substr(colon + 1);
    char* end = nullptr;
    const long p = std::strtol(port.c_str(), &end, 10);
    if (*end != '\0' || p < 0 || p > 65535)
        throw Error(ErrorCode::InvalidArgument, "bad port in bind address '" + bind + "'");
    opt.address = bind.substr(0, colon);
    opt.port = static_cast<unsigned short>(p);
}

void apply_bind_override(ServeOptions& opt) {
    if (const char* bind = std::getenv("FDX_BIND"); bind && *bind) parse_bind(bind, opt);
}

namespace {

class Connection;

struct Shared {
    std::shared_ptr<const runtime::Params> params;
    ServeOptions opt;
    std::atomic<int> active{0};
    std::atomic<int> next_id{1};
};

class Connection : public std::enable_shared_from_this<Connection> {
public:
    Connection(tcp::socket socket, Shared& shared)
        : ws_(std::move(socket)), timer_(ws_.get_executor()), shared_(shared) {}

    ~Connection() {
        if (counted_) --shared_.active;
    }

    void start() {
        ws_.text(true);
        ws_.set_option(websocket::stream_base::timeout::suggested(beast::role_type::server));
        ws_.async_accept([self = shared_from_this()](beast::error_code ec) {
            if (!ec) self->read();
        });
    }

private:
    enum class Phase { AwaitHello, Running, Closing };

    void read() {
        ws_.async_read(buffer_, [self = shared_from_this()](beast::error_code ec, std::size_t) {
            if (ec) return self->disconnected();
            const std::string bytes = beast::buffers_to_string(self->buffer_.data());
            self->buffer_.consume(self->buffer_.size());
            self->on_message(bytes);
            if (self->phase_ != Phase::Closing) self->read();
        });
    }

    void disconnected() {
        phase_ = Phase::Closing;
        timer_.cancel();
    }

    void on_message(const std::string& bytes) {
        if (phase_ == Phase::Closing) return;
        WireMessage m;
        try {
            m = decode_message(bytes);
        } catch (const Error& e) {
            return fail(wire_error::kMalformedMessage, e.detail());
        }
        if (m.v != kProtocolVersion)
            return fail(wire_error::kUnsupportedVersion, "protocol version '" + m.v + "' is not supported");
        if (const auto* h = std::get_if<Hello>(&m.body)) return on_hello(*h);
        if (phase_ != Phase::Running) return fail(wire_error::kProtocolError, "expected Hello");
        if (const auto* t = std::get_if<TickIn>(&m.body)) return on_tick_in(*t);
        if (std::holds_alternative<End>(m.body)) return finish();
        fail(wire_error::kProtocolError, kind_name(m.body) + " is not a client message");
    }

    void on_hello(const Hello& h) {
        if (phase_ != Phase::AwaitHello) return fail(wire_error::kProtocolError, "duplicate Hello");
        if (h.protocol != kProtocolVersion)
            return fail(wire_error::kUnsupportedVersion, "protocol version '" + h.protocol + "' is not supported");
        const auto& opt = shared_.opt;
        if (!h.checkpoint.empty() && h.checkpoint != opt.checkpoint_name)
            return fail(wire_error::kUnknownCheckpoint, "server does not serve checkpoint '" + h.checkpoint + "'");
        const std::string mode = h.mode.empty() ? opt.default_mode : h.mode;
        if (mode != "lockstep" && mode != "realtime")
            return fail(wire_error::kInvalidArgument, "unknown mode '" + mode + "'");
        if (h.temperature < 0) return fail(wire_error::kInvalidArgument, "temperature must be >= 0");
        if (shared_.active.fetch_add(1) >= opt.max_sessions) {
            --shared_.active;
            return fail(wire_error::kTooManySessions,
                        "server is at its limit of " + std::to_string(opt.max_sessions) + " sessions");
        }
        counted_ = true;
        const auto& p = *shared_.params;
        const auto policy = h.temperature > 0 ? model::SamplingPolicy::temperature(h.temperature, h.seed)
                                              : model::SamplingPolicy::greedy();
        try {
            session_ = runtime::new_session(shared_.params, p.config, h.scene, h.seed, policy);
        } catch (const Error& e) {
            return fail(wire_error::kInvalidArgument, e.detail());
        }
        initial_scene_ = h.scene;
        realtime_ = mode == "realtime";
        session_->timed = realtime_;
        phase_ = Phase::Running;
        send(WireMessage{kProtocolVersion,
                         Ready{std::to_string(shared_.next_id++), mode, opt.frame_ms, p.config.max_frames,
                               model::hex64(model::config_hash(p.config)), p.config.vocab}});
        if (realtime_) {
            clock_start_ = std::chrono::steady_clock::now();
            schedule_tick();
        }
    }

    void on_tick_in(const TickIn& t) {
        if (!realtime_) {
            if (t.frame != session_->frame)
                return fail(wire_error::kProtocolError, "TickIn frame " + std::to_string(t.frame) +
                                                            " does not match session frame " +
                                                            std::to_string(session_->frame));
            tick(from_wire(t));
            return;
        }
        // Real time: the latest TickIn before a frame boundary wins, except
        // that scene changes and barge-in marks are never dropped.
        auto in = from_wire(t);
        if (pending_) {
            if (!in.scene) in.scene = pending_->scene;
            in.barge_in_mark = in.barge_in_mark || pending_->barge_in_mark;
        }
        pending_ = in;
    }

    void schedule_tick() {
        const auto period = std::chrono::milliseconds(shared_.opt.frame_ms);
        timer_.expires_at(clock_start_ + period * session_->frame);
        timer_.async_wait([self = shared_from_this()](beast::error_code ec) {
            if (ec || self->phase_ != Phase::Running) return;
            const auto in = self->pending_.value_or(
                runtime::TickInput{self->session_->params->config.vocab.sil, std::nullopt, false});
            self->pending_.reset();
            if (self->tick(in)) self->schedule_tick();
        });
    }

    bool tick(const runtime::TickInput& in) {
        try {
            const auto out = runtime::session_tick(*session_, in);
            if (realtime_ && out.tick_wall_time_us > static_cast<std::int64_t>(shared_.opt.frame_ms) * 1000)
                ++session_->metrics.overrun_count;
            inputs_.push_back(in);
            outputs_.push_back(out);
            send(WireMessage{kProtocolVersion, to_wire(out)});
            return true;
        } catch (const Error& e) {
            fail(e.code() == ErrorCode::SessionExhausted ? wire_error::kSessionExhausted : wire_error::kInvalidArgument,
                 e.detail());
            return false;
        }
    }

    void finish() {
        const auto& v = session_->params->config.vocab;
        const auto feed = runtime::feed_from_inputs(inputs_, initial_scene_, v);
        const auto d = runtime::measure_duplex(outputs_, feed, v.sil);
        send(WireMessage{kProtocolVersion,
                         Metrics{d.barge_in_response_frames, d.turn_take_latency_frames,
                                 session_->metrics.overrun_count}});
        close();
    }

    void fail(const std::string& code, const std::string& message) {
        send(WireMessage{kProtocolVersion, ErrorMessage{code, message}});
        close();
    }

    void close() {
        phase_ = Phase::Closing;
        timer_.cancel();
        if (queue_.empty()) do_close();
    }

    void send(const WireMessage& m) {
        queue_.push_back(encode_message(m));
        if (queue_.size() == 1) write_next();
    }

    void write_next() {
        ws_.async_write(asio::buffer(queue_.front()), [self = shared_from_this()](beast::error_code ec, std::size_t) {
            if (ec) return self->disconnected();
            self->queue_.pop_front();
            if (!self->queue_.empty()) return self->write_next();
            if (self->phase_ == Phase::Closing) self->do_close();
        });
    }

    void do_close() {
        if (closed_) return;
        closed_ = true;
        ws_.async_close(websocket::close_code::normal, [self = shared_from_this()](beast::error_code) {});
    }

    websocket::stream<beast::tcp_stream> ws_;
    asio::steady_timer timer_;
    beast::flat_buffer buffer_;
    Shared& shared_;
    Phase phase_ = Phase::AwaitHello;
    bool counted_ = false;
    bool closed_ = false;
    bool realtime_ = false;
    std::optional<runtime::SessionState> session_;
    std::optional<int> initial_scene_;
    std::optional<runtime::TickInput> pending_;
    std::vector<runtime::TickInput> inputs_;
    std::vector<runtime::TickOutput> outputs_;
    std::deque<std::string> queue_;
    std::chrono::steady_clock::time_point clock_start_;
};

} // namespace

struct Server::Impl {
    Shared shared;
    asio::io_context ioc{1};
    tcp::acceptor acceptor{ioc};
    std::thread thread;
    std::mutex mutex;
    std::condition_variable stopped_cv;
    bool stopped = false;

    void accept() {
        acceptor.async_accept([this](beast::error_code ec, tcp::socket socket) {
            if (ec) return;
            std::make_shared<Connection>(std::move(socket), shared)->start();
            accept();
        });
    }
};

Server::Server(std::shared_ptr<const runtime::Params> params, ServeOptions opt) : impl_(std::make_unique<Impl>()) {
    if (!params) throw Error(ErrorCode::InvalidArgument, "server needs parameters");
    opt.validate();
    impl_->shared.params = std::move(params);
    impl_->shared.opt = std::move(opt);
}

Server::~Server() { stop(); }

unsigned short Server::start() {
    auto& im = *impl_;
    const auto& opt = im.shared.opt;
    try {
        const tcp::endpoint ep(asio::ip::make_address(opt.address), opt.port);
        im.acceptor.open(ep.protocol());
        im.acceptor.set_option(asio::socket_base::reuse_address(true));
        im.acceptor.bind(ep);
        im.acceptor.listen();
    } catch (const std::exception& e) {
        throw Error(ErrorCode::IoError, "cannot listen on " + opt.address + ":" + std::to_string(opt.port) + ": " +
                                            e.what());
    }
    im.accept();
    im.thread = std::thread([&im] { im.ioc.run(); });
    return im.acceptor.local_endpoint().port();
}

void Server::stop() {
    auto& im = *impl_;
    im.ioc.stop();
    if (im.thread.joinable()) im.thread.join();
    {
        std::lock_guard lock(im.mutex);
        im.stopped = true;
    }
    im.stopped_cv.notify_all();
}

void Server::wait() {
    std::unique_lock lock(impl_->mutex);
    impl_->stopped_cv.wait(lock, [this] { return impl_->stopped; });
}

int Server::active_sessions() const { return impl_->shared.active.load(); }

} // namespace fdx::service
