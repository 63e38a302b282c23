#include "dcign/service.hpp"

#include "dcign/errors.hpp"
#include "dcign/eval.hpp"
#include "dcign/image_io.hpp"

#include <httplib.h>
#include <json.hpp>

#include <cmath>

namespace dcign {

using json = nlohmann::json;

namespace {

// Error carrying its HTTP status.
struct RequestError {
    int status;
    std::string message;
};

ServiceResponse error_response(int status, const std::string& message) {
    return {status, json{{"error", message}}.dump(), "application/json"};
}

ServiceResponse ok(const json& body) { return {200, body.dump(), "application/json"}; }

json parse_body(std::string_view body) {
    json doc = json::parse(body, nullptr, false);
    if (doc.is_discarded()) throw RequestError{400, "request body is not valid JSON"};
    if (!doc.is_object()) throw RequestError{400, "request body must be a JSON object"};
    return doc;
}

const json& field(const json& doc, const char* name) {
    const auto it = doc.find(name);
    if (it == doc.end()) throw RequestError{400, std::string("missing field '") + name + "'"};
    return *it;
}

double number_field(const json& doc, const char* name) {
    const auto& v = field(doc, name);
    if (!v.is_number()) throw RequestError{400, std::string("field '") + name + "' must be a number"};
    const double d = v.get<double>();
    if (!std::isfinite(d)) throw RequestError{422, std::string("field '") + name + "' must be finite"};
    return d;
}

std::size_t index_field(const json& doc, const char* name) {
    const auto& v = field(doc, name);
    if (!v.is_number_integer() || v.get<long long>() < 0)
        throw RequestError{400, std::string("field '") + name + "' must be a non-negative integer"};
    return v.get<std::size_t>();
}

Tensor image_field(const json& doc, const Network& net) {
    const auto& v = field(doc, "image");
    if (!v.is_string()) throw RequestError{400, "field 'image' must be a base64 PNG string"};
    Tensor image;
    try {
        image = decode_png(base64_decode(v.get<std::string>()));
    } catch (const FormatError& e) {
        throw RequestError{400, std::string("field 'image': ") + e.what()};
    }
    if (image.shape() != net.image_shape())
        throw RequestError{422, "image is " + std::to_string(image.dim(2)) + "x" + std::to_string(image.dim(1)) +
                                    ", model expects " + std::to_string(net.config().resolution) + "x" +
                                    std::to_string(net.config().resolution)};
    return image;
}

std::vector<double> latents_field(const json& doc, const Network& net) {
    const auto& v = field(doc, "latents");
    if (!v.is_array()) throw RequestError{400, "field 'latents' must be an array of numbers"};
    std::vector<double> z;
    for (const auto& e : v) {
        if (!e.is_number()) throw RequestError{400, "field 'latents' must be an array of numbers"};
        z.push_back(e.get<double>());
        if (!std::isfinite(z.back())) throw RequestError{422, "latents must be finite"};
    }
    if (z.size() != net.latent_dim())
        throw RequestError{422, "expected " + std::to_string(net.latent_dim()) + " latents, got " +
                                    std::to_string(z.size())};
    return z;
}

std::string png_b64(const Tensor& image) { return base64_encode(encode_png(image)); }

json model_info(const Network& net) {
    const auto& layout = net.layout();
    json lj = json::object();
    for (const auto& slot : layout.extrinsic()) lj[std::string(factor_name(slot.factor))] = slot.index;
    json intrinsic = json::array();
    for (std::size_t i = layout.intrinsic_begin(); i < layout.intrinsic_end(); ++i) intrinsic.push_back(i);
    lj["intrinsic"] = intrinsic;
    return {{"latent_dim", net.latent_dim()}, {"layout", lj}, {"resolution", net.config().resolution}};
}

} // namespace

InferenceService::InferenceService(Network net, std::size_t max_payload)
    : net_(std::move(net)), max_payload_(max_payload) {}

ServiceResponse InferenceService::handle(std::string_view method, std::string_view path,
                                         std::string_view body) const {
    const bool is_get = method == "GET", is_post = method == "POST";
    try {
        if (path == "/model/info") {
            if (!is_get) return error_response(405, "use GET for /model/info");
            return ok(model_info(net_));
        }
        if (path != "/encode" && path != "/decode" && path != "/sweep")
            return error_response(404, "no such endpoint: " + std::string(path));
        if (!is_post) return error_response(405, "use POST for " + std::string(path));
        if (body.size() > max_payload_)
            return error_response(413, "payload of " + std::to_string(body.size()) + " bytes exceeds " +
                                           std::to_string(max_payload_));
        const json doc = parse_body(body);

        if (path == "/encode") {
            const auto [dist, trace] = encode(net_, image_field(doc, net_));
            return ok({{"mu", dist.mu}, {"logvar", dist.logvar}});
        }
        if (path == "/decode") return ok({{"image", png_b64(decode_image(net_, latents_field(doc, net_)))}});

        const bool has_image = doc.contains("image"), has_latents = doc.contains("latents");
        if (has_image == has_latents) throw RequestError{400, "give exactly one of 'image' or 'latents'"};
        const auto base = has_image ? encode_mean(net_, image_field(doc, net_)) : latents_field(doc, net_);
        const std::size_t index = index_field(doc, "index");
        const std::size_t steps = index_field(doc, "steps");
        const double from = number_field(doc, "from"), to = number_field(doc, "to");
        if (index >= net_.latent_dim())
            throw RequestError{422, "index " + std::to_string(index) + " outside [0, " +
                                        std::to_string(net_.latent_dim()) + ")"};
        if (steps == 0 || steps > max_sweep_steps)
            throw RequestError{422, "steps must lie in [1, " + std::to_string(max_sweep_steps) + "]"};
        json images = json::array();
        for (const auto& code : sweep_codes(base, index, from, to, steps))
            images.push_back(png_b64(decode_image(net_, code)));
        return ok({{"images", images}});
    } catch (const RequestError& e) {
        return error_response(e.status, e.message);
    } catch (const Error& e) {
        return error_response(422, e.what());
    }
}

HttpServer::HttpServer(const InferenceService& service)
    : service_(service), server_(std::make_unique<httplib::Server>()) {
    server_->set_payload_max_length(service_.max_payload());
    auto route = [this](const httplib::Request& req, httplib::Response& res) {
        const auto r = service_.handle(req.method, req.path, req.body);
        res.status = r.status;
        res.set_content(r.body, r.content_type);
    };
    server_->Get(R"(/.*)", route);
    server_->Post(R"(/.*)", route);
    server_->Put(R"(/.*)", route);
    server_->Delete(R"(/.*)", route);
    server_->set_error_handler([](const httplib::Request&, httplib::Response& res) {
        if (res.status == 413) res.set_content(json{{"error", "payload too large"}}.dump(), "application/json");
    });
}

HttpServer::~HttpServer() { stop(); }

int HttpServer::start(const std::string& host, int port) {
    const int bound = port == 0 ? server_->bind_to_any_port(host) : (server_->bind_to_port(host, port) ? port : -1);
    if (bound < 0) throw IoError("cannot bind " + host + ":" + std::to_string(port));
    thread_ = std::thread([this] { server_->listen_after_bind(); });
    server_->wait_until_ready();
    return bound;
}

void HttpServer::run(const std::string& host, int port) {
    if (!server_->bind_to_port(host, port)) throw IoError("cannot bind " + host + ":" + std::to_string(port));
    server_->listen_after_bind();
}

void HttpServer::stop() {
    server_->stop();
    if (thread_.joinable()) thread_.join();
}

} // namespace dcign
