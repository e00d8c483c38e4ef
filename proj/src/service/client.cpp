#include "fdx/service/client.hpp"

#include "fdx/core/error.hpp"

#include <boost/asio.hpp>
#include <boost/beast/core.hpp>
#include <boost/beast/websocket.hpp>

namespace fdx::service {

namespace asio = boost::asio;
namespace beast = boost::beast;
namespace websocket = beast::websocket;
using tcp = asio::ip::tcp;

struct Client::Impl {
    asio::io_context ioc;
    websocket::stream<tcp::socket> ws{ioc};
    beast::flat_buffer buffer;
    bool open = false;
};

Client::Client(const std::string& host, unsigned short port) : impl_(std::make_unique<Impl>()) {
    try {
        tcp::resolver resolver(impl_->ioc);
        asio::connect(impl_->ws.next_layer(), resolver.resolve(host, std::to_string(port)));
        impl_->ws.handshake(host, "/");
        impl_->ws.text(true);
        impl_->open = true;
    } catch (const std::exception& e) {
        throw Error(ErrorCode::IoError, "cannot connect to " + host + ":" + std::to_string(port) + ": " + e.what());
    }
}

Client::~Client() {
    try {
        close();
    } catch (...) {
    }
}

void Client::send(const WireMessage& m) { send_raw(encode_message(m)); }

void Client::send_raw(const std::string& bytes) {
    try {
        impl_->ws.write(asio::buffer(bytes));
    } catch (const std::exception& e) {
        throw Error(ErrorCode::IoError, std::string("send failed: ") + e.what());
    }
}

std::optional<std::string> Client::try_receive_raw() {
    beast::error_code ec;
    impl_->ws.read(impl_->buffer, ec);
    if (ec == websocket::error::closed) {
        impl_->open = false;
        return std::nullopt;
    }
    if (ec) throw Error(ErrorCode::IoError, "receive failed: " + ec.message());
    std::string out = beast::buffers_to_string(impl_->buffer.data());
    impl_->buffer.consume(impl_->buffer.size());
    return out;
}

std::string Client::receive_raw() {
    auto m = try_receive_raw();
    if (!m) throw Error(ErrorCode::IoError, "connection closed by the server");
    return *m;
}

WireMessage Client::receive() { return decode_message(receive_raw()); }

void Client::close() {
    if (!impl_->open) return;
    impl_->open = false;
    beast::error_code ec;
    impl_->ws.close(websocket::close_code::normal, ec);
}

LockstepTranscript run_lockstep_client(const std::string& host, unsigned short port, const Hello& hello,
                                       const runtime::ScriptedFeed& feed) {
    Client c(host, port);
    LockstepTranscript t;
    auto next = [&] {
        t.lines.push_back(c.receive_raw());
        auto m = decode_message(t.lines.back());
        if (const auto* e = std::get_if<ErrorMessage>(&m.body)) t.error = *e;
        return m;
    };
    c.send(WireMessage{kProtocolVersion, hello});
    if (!std::holds_alternative<Ready>(next().body)) return t;
    for (int f = 0; f < feed.size(); ++f) {
        const auto& in = feed.inputs[static_cast<std::size_t>(f)];
        c.send(WireMessage{kProtocolVersion, TickIn{f, in.listen, in.scene, in.barge_in_mark}});
        const auto m = next();
        const auto* out = std::get_if<TickOut>(&m.body);
        if (!out) return t;
        t.ticks.push_back(*out);
    }
    c.send(WireMessage{kProtocolVersion, End{}});
    const auto m = next();
    if (const auto* metrics = std::get_if<Metrics>(&m.body)) t.metrics = *metrics;
    return t;
}

} // namespace fdx::service
