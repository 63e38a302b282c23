#pragma once

// HTTP+JSON inference over an immutable network.
//
//   GET  /model/info  -> {latent_dim, layout: {azimuth, elevation, light_azimuth, intrinsic: [...]}, resolution}
//   POST /encode      {image}                     -> {mu, logvar}
//   POST /decode      {latents}                   -> {image}
//   POST /sweep       {image | latents, index, from, to, steps} -> {images}
//
// Images travel as base64 8-bit grayscale PNG. Errors come back as
// {"error": message} with 400 (malformed request), 404, 405, 413 (payload
// too large) or 422 (well-formed but inconsistent with the model).

#include "dcign/network.hpp"

#include <cstdint>
#include <memory>
#include <string>
#include <string_view>
#include <thread>

namespace httplib {
class Server;
}

namespace dcign {

struct ServiceResponse {
    int status = 200;
    std::string body;
    std::string content_type = "application/json";
};

class InferenceService {
public:
    static constexpr std::size_t default_max_payload = 4 << 20;
    static constexpr std::size_t max_sweep_steps = 256;

    explicit InferenceService(Network net, std::size_t max_payload = default_max_payload);

    // Pure function of (method, path, body); safe to call concurrently.
    ServiceResponse handle(std::string_view method, std::string_view path, std::string_view body) const;

    const Network& network() const noexcept { return net_; }
    std::size_t max_payload() const noexcept { return max_payload_; }

private:
    const Network net_;
    const std::size_t max_payload_;
};

// Serves an InferenceService over HTTP on a background thread.
class HttpServer {
public:
    explicit HttpServer(const InferenceService& service);
    ~HttpServer();
    HttpServer(const HttpServer&) = delete;
    HttpServer& operator=(const HttpServer&) = delete;

    // Binds (port 0 picks a free port) and starts serving; returns the port.
    int start(const std::string& host, int port);
    // Binds and serves on the calling thread until stop().
    void run(const std::string& host, int port);
    void stop();

private:
    const InferenceService& service_;
    std::unique_ptr<httplib::Server> server_;
    std::thread thread_;
};

} // namespace dcign
