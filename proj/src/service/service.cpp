#include "pfm/service.hpp"

#include "pfm/error.hpp"

#include <httplib.h>

#include <regex>

namespace pfm {

namespace {

constexpr const char* kJson = "application/json";

void send_json(httplib::Response& res, int status, const Json& body) {
    res.status = status;
    res.set_content(canonical_line(body), kJson);
}

void send_error(httplib::Response& res, ErrorCode code, const std::string& message) {
    send_json(res, http_status(code), Json{{"error", Json{{"code", std::string(to_string(code))}, {"message", message}}}});
}

Json parse_body(const httplib::Request& req) {
    try {
        return Json::parse(req.body);
    } catch (const Json::parse_error& e) {
        fail(ErrorCode::ParseError, std::string("request body: ") + e.what());
    }
}

std::optional<TimestampMs> time_param(const httplib::Request& req, const char* name) {
    if (!req.has_param(name)) return std::nullopt;
    const std::string v = req.get_param_value(name);
    if (v.size() == 10 && v[4] == '-') return parse_date_days(v) * kDayMs;
    try {
        std::size_t used = 0;
        const long long ms = std::stoll(v, &used);
        if (used == v.size()) return ms;
    } catch (const std::exception&) {
    }
    fail(ErrorCode::InvalidArgument, std::string(name) + " must be epoch milliseconds or YYYY-MM-DD");
}

std::vector<std::string> split_commas(const std::string& s) {
    std::vector<std::string> out;
    std::size_t pos = 0;
    while (pos <= s.size()) {
        const auto comma = s.find(',', pos);
        const auto part = s.substr(pos, comma == std::string::npos ? std::string::npos : comma - pos);
        if (!part.empty()) out.push_back(part);
        if (comma == std::string::npos) break;
        pos = comma + 1;
    }
    return out;
}

using Handler = std::function<void(const httplib::Request&, httplib::Response&, const std::string& user)>;

}  // namespace

int http_status(ErrorCode code) {
    switch (code) {
        case ErrorCode::ParseError:
        case ErrorCode::InvalidEvent:
        case ErrorCode::InvalidArgument:
        case ErrorCode::InvalidRange:
        case ErrorCode::SchemaError:
        case ErrorCode::SchemaVersionMismatch:
        case ErrorCode::MalformedBarcode:
        case ErrorCode::BadProportions:
            return 400;
        case ErrorCode::NotFound:
        case ErrorCode::NoModel:
        case ErrorCode::NoProfile:
            return 404;
        case ErrorCode::Conflict:
        case ErrorCode::DuplicateId:
            return 409;
        case ErrorCode::ClientUnavailable:
            return 503;
        case ErrorCode::IoError:
            return 500;
        default:
            return 422;
    }
}

std::optional<std::string> HttpTransport::get(const std::string& url, const std::map<std::string, std::string>& headers) {
    static const std::regex re(R"(^(http://[^/]+)(/.*)?$)");
    std::smatch m;
    if (!std::regex_match(url, m, re)) fail(ErrorCode::ClientUnavailable, "unsupported url '" + url + "' (plain http only)");
    httplib::Client client(m[1].str());
    client.set_connection_timeout(timeout_seconds_, 0);
    client.set_read_timeout(timeout_seconds_, 0);
    httplib::Headers h;
    for (const auto& [k, v] : headers) h.emplace(k, v);
    const std::string path = m[2].matched ? m[2].str() : "/";
    auto res = client.Get(path, h);
    if (!res) fail(ErrorCode::ClientUnavailable, "request to " + m[1].str() + " failed: " + httplib::to_string(res.error()));
    if (res->status == 200) return res->body;
    if (res->status == 404) return std::nullopt;
    fail(ErrorCode::ClientUnavailable, "remote answered HTTP " + std::to_string(res->status));
}

Service::Service(ServiceOptions options)
    : options_(std::move(options)), engine_(options_.engine), server_(std::make_unique<httplib::Server>()) {
    routes();
    if (options_.background_enrichment) enrich_worker_ = std::thread([this] { enrichment_loop(); });
}

Service::~Service() {
    stop();
    {
        std::lock_guard lock(queue_mutex_);
        stopping_ = true;
    }
    queue_cv_.notify_all();
    if (enrich_worker_.joinable()) enrich_worker_.join();
    std::lock_guard lock(build_mutex_);
    for (auto& [user, job] : builds_) {
        if (job.worker.joinable()) job.worker.join();
    }
}

int Service::bind() {
    const int port = options_.port == 0 ? server_->bind_to_any_port(options_.host)
                                        : (server_->bind_to_port(options_.host, options_.port) ? options_.port : -1);
    if (port < 0) fail(ErrorCode::IoError, "cannot bind " + options_.host + ":" + std::to_string(options_.port));
    return port;
}

void Service::serve() { server_->listen_after_bind(); }

void Service::stop() {
    if (server_) server_->stop();
}

void Service::enqueue_enrichment(const std::string& user, const std::string& event_id) {
    {
        std::lock_guard lock(queue_mutex_);
        queue_.emplace_back(user, event_id);
    }
    queue_cv_.notify_one();
}

void Service::enrichment_loop() {
    while (true) {
        std::pair<std::string, std::string> job;
        {
            std::unique_lock lock(queue_mutex_);
            queue_cv_.wait(lock, [&] { return stopping_ || !queue_.empty(); });
            if (stopping_ && queue_.empty()) return;
            job = std::move(queue_.front());
            queue_.pop_front();
            busy_ = true;
        }
        try {
            engine_.enrich_event(job.first, job.second);
        } catch (const std::exception&) {
            // Unresolved foods stay unenriched; POST /enrich retries them.
        }
        {
            std::lock_guard lock(queue_mutex_);
            busy_ = false;
        }
        idle_cv_.notify_all();
    }
}

void Service::drain_enrichment() {
    std::unique_lock lock(queue_mutex_);
    idle_cv_.wait(lock, [&] { return queue_.empty() && !busy_; });
}

Json Service::build_status(const std::string& user) {
    std::lock_guard lock(build_mutex_);
    Json j{{"status", "idle"}, {"user_id", user}};
    if (auto it = builds_.find(user); it != builds_.end()) {
        j["status"] = it->second.status;
        if (!it->second.summary.is_null()) j["summary"] = it->second.summary;
        if (!it->second.error.is_null()) j["error"] = it->second.error;
    }
    if (j["status"] == "idle") {
        if (auto m = engine_.store().load_model(user)) {
            j["status"] = "done";
            j["summary"] = model_summary(*m);
        }
    }
    return j;
}

void Service::wait_for_build(const std::string& user) {
    std::unique_lock lock(build_mutex_);
    build_cv_.wait(lock, [&] {
        auto it = builds_.find(user);
        return it == builds_.end() || it->second.status != "running";
    });
}

void Service::start_build(const std::string& user, bool async, Json* summary) {
    auto run = [this, user] {
        Json result;
        Json error;
        try {
            result = engine_.build_model(user);
        } catch (const Error& e) {
            error = Json{{"code", std::string(to_string(e.code()))}, {"message", e.what()}};
        } catch (const std::exception& e) {
            error = Json{{"code", "Internal"}, {"message", e.what()}};
        }
        {
            std::lock_guard lock(build_mutex_);
            auto& job = builds_[user];
            job.status = error.is_null() ? "done" : "failed";
            job.summary = result;
            job.error = error;
        }
        build_cv_.notify_all();
    };
    {
        std::unique_lock lock(build_mutex_);
        build_cv_.wait(lock, [&] {
            auto it = builds_.find(user);
            return it == builds_.end() || it->second.status != "running";
        });
        auto& job = builds_[user];
        if (job.worker.joinable()) job.worker.join();
        job.status = "running";
        job.summary = nullptr;
        job.error = nullptr;
        if (async) {
            job.worker = std::thread(run);
            return;
        }
    }
    run();
    std::lock_guard lock(build_mutex_);
    const auto& job = builds_[user];
    if (job.status == "failed") {
        const std::string code = job.error.at("code").get<std::string>();
        for (int c = 0; c <= static_cast<int>(ErrorCode::IoError); ++c) {
            if (to_string(static_cast<ErrorCode>(c)) == code) fail(static_cast<ErrorCode>(c), job.error.at("message").get<std::string>());
        }
        throw std::runtime_error(job.error.at("message").get<std::string>());
    }
    *summary = job.summary;
}

void Service::routes() {
    auto& srv = *server_;
    const std::string token = engine_.config().api_token;

    auto wrap = [this, token](Handler h) {
        return [this, token, h](const httplib::Request& req, httplib::Response& res) {
            try {
                if (!token.empty() && req.get_header_value("Authorization") != "Bearer " + token) {
                    send_json(res, 401, Json{{"error", Json{{"code", "Unauthorized"}, {"message", "missing or wrong bearer token"}}}});
                    return;
                }
                const std::string user = req.matches.size() > 1 ? req.matches[1].str() : std::string();
                if (!user.empty() && !valid_user_id(user)) fail(ErrorCode::InvalidArgument, "invalid user id '" + user + "'");
                h(req, res, user);
            } catch (const Error& e) {
                send_error(res, e.code(), e.what());
            } catch (const Json::exception& e) {
                send_error(res, ErrorCode::SchemaError, e.what());
            } catch (const std::exception& e) {
                send_json(res, 500, Json{{"error", Json{{"code", "Internal"}, {"message", e.what()}}}});
            }
        };
    };

    srv.Get("/healthz", [](const httplib::Request&, httplib::Response& res) { send_json(res, 200, Json{{"status", "ok"}}); });

    srv.Post(R"(/v1/users/([^/]+)/events)", wrap([this](const auto& req, auto& res, const std::string& user) {
        const bool now = req.get_param_value("enrich") == "now";
        bool created = false;
        Json out = engine_.add_event(user, parse_body(req), now, &created);
        if (created && !now && options_.background_enrichment && out["event"].value("type", "") == "food" &&
            !out["event"]["why"].contains("nutrition")) {
            enqueue_enrichment(user, out["event"]["event_id"].get<std::string>());
        }
        send_json(res, created ? 201 : 200, out);
    }));

    srv.Get(R"(/v1/users/([^/]+)/chronicle)", wrap([this](const auto& req, auto& res, const std::string& user) {
        const auto streams = split_commas(req.get_param_value("stream"));
        send_json(res, 200, engine_.chronicle_query(user, time_param(req, "from"), time_param(req, "to"), streams));
    }));

    srv.Get(R"(/v1/users/([^/]+)/heatmap)", wrap([this](const auto& req, auto& res, const std::string& user) {
        if (!req.has_param("streamA") || !req.has_param("streamB") || !req.has_param("window")) {
            fail(ErrorCode::InvalidArgument, "streamA, streamB and window are required");
        }
        const auto window = parse_duration_minutes(req.get_param_value("window"));
        std::uint64_t support = 1;
        if (req.has_param("min_support")) support = std::stoull(req.get_param_value("min_support"));
        send_json(res, 200, engine_.heatmap(user, req.get_param_value("streamA"), req.get_param_value("streamB"), window, support));
    }));

    srv.Post(R"(/v1/users/([^/]+)/enrich)", wrap([this](const auto&, auto& res, const std::string& user) {
        send_json(res, 200, engine_.enrich(user));
    }));

    srv.Post(R"(/v1/users/([^/]+)/hypotheses/verify)", wrap([this](const auto& req, auto& res, const std::string& user) {
        send_json(res, 200, engine_.verify(user, parse_body(req)));
    }));

    srv.Post(R"(/v1/users/([^/]+)/model/build)", wrap([this](const auto& req, auto& res, const std::string& user) {
        if (req.get_param_value("async") == "true") {
            start_build(user, true, nullptr);
            send_json(res, 202, build_status(user));
            return;
        }
        Json summary;
        start_build(user, false, &summary);
        send_json(res, 200, summary);
    }));

    srv.Get(R"(/v1/users/([^/]+)/model)", wrap([this](const auto&, auto& res, const std::string& user) {
        send_json(res, 200, build_status(user));
    }));

    srv.Get(R"(/v1/users/([^/]+)/model/full)", wrap([this](const auto&, auto& res, const std::string& user) {
        send_json(res, 200, engine_.show_model(user));
    }));

    srv.Post(R"(/v1/users/([^/]+)/recommendations)", wrap([this](const auto& req, auto& res, const std::string& user) {
        send_json(res, 200, engine_.recommend(user, parse_body(req)));
    }));

    srv.Post(R"(/v1/users/([^/]+)/substitutes)", wrap([this](const auto& req, auto& res, const std::string& user) {
        send_json(res, 200, engine_.substitutes(user, parse_body(req)));
    }));

    srv.Get(R"(/v1/users/([^/]+)/profile)", wrap([this](const auto&, auto& res, const std::string& user) {
        send_json(res, 200, engine_.profile(user));
    }));

    srv.Put(R"(/v1/users/([^/]+)/profile)", wrap([this](const auto& req, auto& res, const std::string& user) {
        send_json(res, 200, engine_.set_profile(user, parse_body(req)));
    }));

    if (!options_.ui_dir.empty()) srv.set_mount_point("/ui", options_.ui_dir);
}

}  // namespace pfm
