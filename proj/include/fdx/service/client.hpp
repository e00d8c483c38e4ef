#pragma once

#include "fdx/runtime/scripted.hpp"
#include "fdx/service/protocol.hpp"

#include <memory>
#include <string>
#include <vector>

namespace fdx::service {

// Blocking websocket client. Throws IoError on transport failures.
class Client {
public:
    Client(const std::string& host, unsigned short port);
    ~Client();
    Client(const Client&) = delete;
    Client& operator=(const Client&) = delete;

    void send(const WireMessage& m);
    void send_raw(const std::string& bytes);
    WireMessage receive();
    std::string receive_raw();
    // Next message, or nullopt once the server has closed the connection.
    std::optional<std::string> try_receive_raw();
    void close();

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

struct LockstepTranscript {
    std::vector<std::string> lines;  // every server message, as received
    std::vector<TickOut> ticks;
    std::optional<Metrics> metrics;
    std::optional<ErrorMessage> error;
};

// Hello, one TickIn per feed frame (waiting for each TickOut), then End.
LockstepTranscript run_lockstep_client(const std::string& host, unsigned short port, const Hello& hello,
                                       const runtime::ScriptedFeed& feed);

} // namespace fdx::service
