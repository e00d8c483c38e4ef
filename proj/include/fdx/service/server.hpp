#pragma once

#include "fdx/runtime/session.hpp"

#include <memory>
#include <string>

namespace fdx::service {

struct ServeOptions {
    std::string address = "127.0.0.1";
    unsigned short port = 8765;  // 0 picks a free port
    int max_sessions = 8;
    std::string default_mode = "lockstep";
    int frame_ms = 80;
    std::string checkpoint_name;  // what Hello.checkpoint must match when set

    void validate() const;
};

// "host:port" from the FDX_BIND environment variable, when set, replaces the
// address and port. Throws InvalidArgument on a malformed value.
void apply_bind_override(ServeOptions& opt);
void parse_bind(const std::string& bind, ServeOptions& opt);

// Websocket server; each connection owns one session over the shared
// parameters. Handlers run on one background thread.
class Server {
public:
    Server(std::shared_ptr<const runtime::Params> params, ServeOptions opt);
    ~Server();
    Server(const Server&) = delete;
    Server& operator=(const Server&) = delete;

    // Binds, starts accepting and returns the bound port. Throws IoError.
    unsigned short start();
    void stop();
    // Blocks until stop() is called from another thread.
    void wait();
    int active_sessions() const;

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

} // namespace fdx::service
