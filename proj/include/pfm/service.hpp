#pragma once

#include "pfm/app.hpp"
#include "pfm/error.hpp"

#include <condition_variable>
#include <deque>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <thread>

namespace httplib {
class Server;
}

namespace pfm {

/// HTTP status for a domain error.
int http_status(ErrorCode code);

/// Plain-HTTP transport for the remote nutrition client.
class HttpTransport final : public Transport {
public:
    explicit HttpTransport(int timeout_seconds = 5) : timeout_seconds_(timeout_seconds) {}
    std::optional<std::string> get(const std::string& url, const std::map<std::string, std::string>& headers) override;

private:
    int timeout_seconds_;
};

struct ServiceOptions {
    EngineOptions engine;
    std::string host = "127.0.0.1";
    int port = 8080;  // 0 = pick a free port
    std::string ui_dir;
    bool background_enrichment = true;
};

class Service {
public:
    explicit Service(ServiceOptions options);
    ~Service();

    Service(const Service&) = delete;
    Service& operator=(const Service&) = delete;

    /// Binds the socket; returns the bound port or throws IoError.
    int bind();
    /// Serves until stop(). Call after bind().
    void serve();
    void stop();

    Engine& engine() { return engine_; }

    /// Blocks until queued background enrichment is done (tests, shutdown).
    void drain_enrichment();
    /// Blocks until no model build is running for the user.
    void wait_for_build(const std::string& user);

private:
    struct BuildJob {
        std::string status = "idle";  // idle | running | done | failed
        Json summary;
        Json error;
        std::thread worker;
    };

    void routes();
    void enqueue_enrichment(const std::string& user, const std::string& event_id);
    void enrichment_loop();
    Json build_status(const std::string& user);
    void start_build(const std::string& user, bool async, Json* summary);

    ServiceOptions options_;
    Engine engine_;
    std::unique_ptr<httplib::Server> server_;

    std::mutex queue_mutex_;
    std::condition_variable queue_cv_;
    std::condition_variable idle_cv_;
    std::deque<std::pair<std::string, std::string>> queue_;
    bool busy_ = false;
    bool stopping_ = false;
    std::thread enrich_worker_;

    std::mutex build_mutex_;
    std::condition_variable build_cv_;
    std::map<std::string, BuildJob> builds_;
};

}  // namespace pfm
