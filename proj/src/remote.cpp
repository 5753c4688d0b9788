#include "scratch/remote.hpp"

#include "scratch/io.hpp"

#include <httplib.h>
#include <json.hpp>

#include <chrono>
#include <cstdlib>
#include <thread>

namespace scratch {
namespace {

using nlohmann::json;

httplib::Headers auth_headers() {
    httplib::Headers headers;
    if (const char* token = std::getenv("SCRATCH_REMOTE_TOKEN"))
        headers.emplace("Authorization", std::string("Bearer ") + token);
    return headers;
}

// POSTs with up to 3 retries on transport-level failure (no HTTP response at
// all). Any received response is final.
httplib::Result post_with_retry(const std::string& host, int port, const std::string& path,
                                const std::string& body, const std::string& content_type) {
    httplib::Client client(host, port);
    client.set_connection_timeout(10);
    client.set_read_timeout(30);
    const int max_retries = 3;
    for (int attempt = 0;; ++attempt) {
        auto res = client.Post(path, auth_headers(), body, content_type);
        if (res) return res;
        if (attempt >= max_retries)
            throw TransportError("POST " + host + ":" + std::to_string(port) + path +
                                 " failed after " + std::to_string(attempt + 1) +
                                 " attempts: " + httplib::to_string(res.error()));
        std::this_thread::sleep_for(std::chrono::milliseconds(100 << attempt));
    }
}

json parse_body(const httplib::Result& res, const std::string& what) {
    if (res->status != 200)
        throw MalformedResponse(what + " returned HTTP " + std::to_string(res->status));
    try {
        return json::parse(res->body);
    } catch (const json::exception& e) {
        throw MalformedResponse(what + " returned unparseable JSON: " + e.what());
    }
}

}  // namespace

RemoteClassifier::RemoteClassifier(std::string host, int port, int num_classes,
                                   std::vector<std::string> labels)
    : host_(std::move(host)), port_(port), num_classes_(num_classes),
      labels_(std::move(labels)) {
    if (num_classes_ < 2) throw ValueError("remote classifier needs at least 2 classes");
    if (labels_.empty())
        for (int i = 0; i < num_classes_; ++i) labels_.push_back("class_" + std::to_string(i));
}

std::string RemoteClassifier::identity() const {
    return "remote:" + host_ + ":" + std::to_string(port_) + "/predict";
}

ProbVector RemoteClassifier::predict_raw(const Image& x) const {
    json req;
    req["shape"] = {x.height, x.width, 3};
    Vector flat = x.flatten();
    req["pixels"] = std::vector<double>(flat.data(), flat.data() + flat.size());

    auto res = post_with_retry(host_, port_, "/predict", req.dump(), "application/json");
    json body = parse_body(res, "/predict");
    if (!body.contains("probs") || !body["probs"].is_array())
        throw MalformedResponse("/predict response lacks a probs array");
    auto probs = body["probs"].get<std::vector<double>>();
    if (static_cast<int>(probs.size()) != num_classes_)
        throw MalformedResponse("/predict returned " + std::to_string(probs.size()) +
                                " probabilities, expected " + std::to_string(num_classes_));
    ProbVector p = Eigen::Map<const Vector>(probs.data(), probs.size());
    validate_probs(p);
    return p;
}

RemoteCaptioner::RemoteCaptioner(std::string host, int port)
    : host_(std::move(host)), port_(port) {}

std::string RemoteCaptioner::identity() const {
    return "remote:" + host_ + ":" + std::to_string(port_) + "/caption";
}

CaptionResult RemoteCaptioner::caption_raw(const Image& x) const {
    auto res = post_with_retry(host_, port_, "/caption", encode_scrt(x),
                               "application/octet-stream");
    json body = parse_body(res, "/caption");

    CaptionResult out;
    if (body.contains("caption") && !body["caption"].is_null()) {
        if (!body["caption"].is_string())
            throw MalformedResponse("/caption caption field is not a string");
        out.caption = body["caption"].get<std::string>();
    }
    if (body.contains("confidence") && !body["confidence"].is_null()) {
        if (!body["confidence"].is_number())
            throw MalformedResponse("/caption confidence field is not a number");
        double c = body["confidence"].get<double>();
        if (c < 0.0 || c > 1.0)
            throw MalformedResponse("/caption confidence " + std::to_string(c) +
                                    " outside [0,1]");
        out.confidence = c;
    }
    return out;
}

}  // namespace scratch
