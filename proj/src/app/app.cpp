#include "pfm/app.hpp"

#include "pfm/error.hpp"
#include "pfm/heatmap.hpp"
#include "pfm/verify.hpp"

#include <algorithm>
#include <cctype>
#include <cstdlib>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>

namespace fs = std::filesystem;

namespace pfm {

namespace {

std::string read_file(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    if (!in) return {};
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

// Complete lines of a JSONL file. A final line without a newline is only
// returned if it parses; otherwise it is the remains of an interrupted write.
std::vector<std::pair<std::size_t, Json>> read_jsonl(const fs::path& p) {
    std::vector<std::pair<std::size_t, Json>> out;
    const std::string text = read_file(p);
    std::size_t pos = 0;
    std::size_t line = 0;
    while (pos < text.size()) {
        const auto nl = text.find('\n', pos);
        const bool complete = nl != std::string::npos;
        const std::string chunk = text.substr(pos, complete ? nl - pos : std::string::npos);
        pos = complete ? nl + 1 : text.size();
        ++line;
        if (chunk.find_first_not_of(" \t\r") == std::string::npos) continue;
        try {
            out.emplace_back(line, Json::parse(chunk));
        } catch (const Json::parse_error& e) {
            if (!complete) break;
            fail(ErrorCode::ParseError, p.string() + " line " + std::to_string(line) + ": " + e.what());
        }
    }
    return out;
}

// Drops a torn tail so the next append starts on a fresh line.
void repair_tail(const fs::path& p) {
    if (!fs::exists(p)) return;
    const std::string text = read_file(p);
    if (text.empty() || text.back() == '\n') return;
    const auto nl = text.rfind('\n');
    const std::string tail = text.substr(nl == std::string::npos ? 0 : nl + 1);
    if (Json::accept(tail)) {
        std::ofstream(p, std::ios::app | std::ios::binary) << '\n';
    } else {
        fs::resize_file(p, nl == std::string::npos ? 0 : nl + 1);
    }
}

void append_line(const fs::path& p, const std::string& line) {
    fs::create_directories(p.parent_path());
    repair_tail(p);
    std::ofstream out(p, std::ios::app | std::ios::binary);
    if (!out) fail(ErrorCode::IoError, "cannot append to " + p.string());
    out << line << '\n';
    out.flush();
    if (!out) fail(ErrorCode::IoError, "write to " + p.string() + " failed");
}

Json parse_json_text(const std::string& text, const std::string& what) {
    try {
        return Json::parse(text);
    } catch (const Json::parse_error& e) {
        fail(ErrorCode::ParseError, what + ": " + e.what());
    }
}

}  // namespace

bool valid_user_id(const std::string& id) {
    if (id.empty() || id.size() > 64 || id.front() == '.') return false;
    return std::all_of(id.begin(), id.end(), [](char c) {
        return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-' || c == '.';
    });
}

void write_file_atomic(const fs::path& path, const std::string& content) {
    fs::create_directories(path.parent_path());
    fs::path tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) fail(ErrorCode::IoError, "cannot write " + tmp.string());
        out << content;
        out.flush();
        if (!out) fail(ErrorCode::IoError, "write to " + tmp.string() + " failed");
    }
    fs::rename(tmp, path);
}

Store::Store(fs::path root) : root_(std::move(root)) {}

fs::path Store::user_dir(const std::string& user) const {
    if (!valid_user_id(user)) fail(ErrorCode::InvalidArgument, "invalid user id '" + user + "'");
    return root_ / "users" / user;
}

std::vector<std::string> Store::users() const {
    std::vector<std::string> out;
    const fs::path dir = root_ / "users";
    if (!fs::exists(dir)) return out;
    for (const auto& entry : fs::directory_iterator(dir)) {
        if (entry.is_directory() && valid_user_id(entry.path().filename().string())) {
            out.push_back(entry.path().filename().string());
        }
    }
    std::sort(out.begin(), out.end());
    return out;
}

Chronicle Store::load_chronicle(const std::string& user) const {
    Chronicle c(user);
    for (auto& [line, j] : read_jsonl(user_dir(user) / "chronicle.jsonl")) c.append(event_from_json(j, line));
    return c;
}

std::vector<EnrichmentRecord> Store::load_enrichment(const std::string& user) const {
    std::vector<EnrichmentRecord> out;
    for (auto& [line, j] : read_jsonl(user_dir(user) / "enrichment.jsonl")) {
        try {
            out.push_back(enrichment_record_from_json(j));
        } catch (const Json::exception& e) {
            fail(ErrorCode::ParseError, "enrichment line " + std::to_string(line) + ": " + e.what());
        }
    }
    return out;
}

Chronicle Store::load_enriched(const std::string& user) const {
    Chronicle raw = load_chronicle(user);
    std::map<std::string, EnrichmentRecord> latest;
    for (auto& r : load_enrichment(user)) latest[r.event_id] = std::move(r);
    Chronicle out(user);
    for (const auto& e : raw.events()) {
        const auto* f = std::get_if<FoodEvent>(&e);
        auto it = f ? latest.find(f->event_id) : latest.end();
        if (f && !f->nutrition && it != latest.end()) out.append(apply_enrichment(*f, it->second));
        else out.append(e);
    }
    return out;
}

Store::AppendResult Store::append(const std::string& user, const Event& e) {
    if (pfm::user_id(e) != user) {
        fail(ErrorCode::InvalidEvent, "event user '" + pfm::user_id(e) + "' does not match '" + user + "'");
    }
    if (auto problems = validate(e); !problems.empty()) fail(ErrorCode::InvalidEvent, problems.front());
    const Chronicle current = load_chronicle(user);
    if (const Event* existing = current.find(event_id(e))) {
        if (canonical(to_json(*existing)) == canonical(to_json(e))) return AppendResult::Replayed;
        fail(ErrorCode::Conflict, "event '" + event_id(e) + "' already exists with different content");
    }
    append_line(user_dir(user) / "chronicle.jsonl", canonical(to_json(e)));
    return AppendResult::Created;
}

void Store::append_enrichment(const std::string& user, const EnrichmentRecord& r) {
    append_line(user_dir(user) / "enrichment.jsonl", canonical(to_json(r)));
}

std::optional<PersonalFoodModel> Store::load_model(const std::string& user) const {
    const fs::path p = user_dir(user) / "model.json";
    if (!fs::exists(p)) return std::nullopt;
    return model_from_json(parse_json_text(read_file(p), p.string()));
}

void Store::save_model(const std::string& user, const PersonalFoodModel& m) {
    write_file_atomic(user_dir(user) / "model.json", canonical_line(to_json(m)));
}

std::vector<StaticConstraint> Store::load_constraints(const std::string& user) const {
    const fs::path p = user_dir(user) / "profile.json";
    std::vector<StaticConstraint> out;
    if (!fs::exists(p)) return out;
    const Json j = parse_json_text(read_file(p), p.string());
    for (const auto& c : j.value("constraints", Json::array())) out.push_back(static_constraint_from_json(c));
    return out;
}

void Store::save_constraints(const std::string& user, const std::vector<StaticConstraint>& c) {
    Json arr = Json::array();
    for (const auto& x : c) arr.push_back(to_json(x));
    write_file_atomic(user_dir(user) / "profile.json", canonical_line(Json{{"constraints", arr}}));
}

std::mutex& Store::user_mutex(const std::string& user) {
    std::lock_guard lock(map_mutex_);
    auto& m = user_mutexes_[user];
    if (!m) m = std::make_unique<std::mutex>();
    return *m;
}

EngineConfig resolve_config(const EngineOptions& options) {
    EngineConfig cfg;
    if (options.config_path) {
        cfg = load_config(*options.config_path);
    } else if (const fs::path def = options.data_dir / "config" / "pfm.json"; fs::exists(def)) {
        cfg = load_config(def.string());
    }
    if (const char* env = std::getenv("PFM_SEED"); env && *env) {
        try {
            cfg.seed = std::stoull(env);
        } catch (const std::exception&) {
            fail(ErrorCode::InvalidArgument, std::string("PFM_SEED must be an unsigned integer: '") + env + "'");
        }
    }
    if (options.seed) cfg.seed = *options.seed;
    return cfg;
}

Engine::Engine(EngineOptions options)
    : options_(std::move(options)), config_(resolve_config(options_)), store_(options_.data_dir) {}

const ClientRegistry& Engine::registry() {
    std::lock_guard lock(registry_mutex_);
    if (!registry_) {
        RegistryOptions ro;
        ro.data_dir = options_.data_dir;
        ro.priority = config_.client_priority;
        ro.cache_ttl_days = config_.cache_ttl_days;
        ro.remote_base_url = config_.remote_base_url;
        ro.api_key = options_.api_key;
        ro.transport = options_.transport;
        ro.clock = options_.clock;
        ro.taste_trim = config_.taste_trim;
        registry_ = std::make_unique<ClientRegistry>(make_registry(ro));
    }
    return *registry_;
}

Json Engine::import_chronicle(const Chronicle& c) {
    const std::string user = c.user_id();
    if (user.empty()) {
        if (c.empty()) return Json{{"created", 0}, {"replayed", 0}, {"user_id", ""}};
        fail(ErrorCode::InvalidArgument, "chronicle has no user id");
    }
    std::lock_guard lock(store_.user_mutex(user));
    const Chronicle current = store_.load_chronicle(user);
    // Check every event before writing anything, so a conflicting import
    // leaves the store unchanged.
    for (const auto& e : c.events()) {
        if (const Event* existing = current.find(event_id(e));
            existing && canonical(to_json(*existing)) != canonical(to_json(e))) {
            fail(ErrorCode::Conflict, "event '" + event_id(e) + "' already exists with different content");
        }
    }
    std::size_t created = 0;
    std::size_t replayed = 0;
    for (const auto& e : c.events()) {
        if (current.contains(event_id(e))) {
            ++replayed;
            continue;
        }
        store_.append(user, e);
        ++created;
    }
    return Json{{"created", created}, {"replayed", replayed}, {"user_id", user}};
}

EnrichmentRecord Engine::enrich_event(const std::string& user, const std::string& event_id) {
    const Chronicle c = store_.load_chronicle(user);
    const Event* e = c.find(event_id);
    if (!e) fail(ErrorCode::NotFound, "no event '" + event_id + "'");
    const auto* f = std::get_if<FoodEvent>(e);
    if (!f) fail(ErrorCode::InvalidArgument, "event '" + event_id + "' is not a food event");
    auto record = registry().enrich(*f);
    std::lock_guard lock(store_.user_mutex(user));
    store_.append_enrichment(user, record);
    return record;
}

Json Engine::add_event(const std::string& user, Json body, bool enrich_now, bool* created) {
    if (!body.is_object()) fail(ErrorCode::ParseError, "event body must be a JSON object");
    if (!body.contains("user_id")) body["user_id"] = user;
    const Event e = event_from_json(body, 1);
    Store::AppendResult result;
    {
        std::lock_guard lock(store_.user_mutex(user));
        result = store_.append(user, e);
    }
    if (created) *created = result == Store::AppendResult::Created;
    Json out{{"status", result == Store::AppendResult::Created ? "created" : "replayed"}};
    const auto* f = std::get_if<FoodEvent>(&e);
    if (enrich_now && f && !f->nutrition) {
        const auto records = store_.load_enrichment(user);
        const bool have = std::any_of(records.begin(), records.end(),
                                      [&](const EnrichmentRecord& r) { return r.event_id == f->event_id; });
        try {
            if (!have) enrich_event(user, f->event_id);
        } catch (const Error& err) {
            if (err.code() != ErrorCode::UnresolvedFood && err.code() != ErrorCode::InvalidArgument) throw;
            out["enrichment_error"] = Json{{"code", std::string(to_string(err.code()))}, {"message", err.what()}};
        }
    }
    const Chronicle enriched = store_.load_enriched(user);
    out["event"] = to_json(*enriched.find(event_id(e)));
    return out;
}

Json Engine::enrich(const std::string& user) {
    const Chronicle c = store_.load_chronicle(user);
    std::set<std::string> done;
    for (const auto& r : store_.load_enrichment(user)) done.insert(r.event_id);
    std::size_t enriched = 0;
    std::size_t skipped = 0;
    Json unresolved = Json::array();
    for (const auto& e : c.events()) {
        const auto* f = std::get_if<FoodEvent>(&e);
        if (!f) continue;
        if (f->nutrition || done.contains(f->event_id)) {
            ++skipped;
            continue;
        }
        try {
            auto record = registry().enrich(*f);
            std::lock_guard lock(store_.user_mutex(user));
            store_.append_enrichment(user, record);
            ++enriched;
        } catch (const Error& err) {
            if (err.code() != ErrorCode::UnresolvedFood && err.code() != ErrorCode::InvalidArgument) throw;
            unresolved.push_back(Json{{"code", std::string(to_string(err.code()))}, {"event_id", f->event_id}});
        }
    }
    return Json{{"enriched", enriched}, {"skipped", skipped}, {"unresolved", unresolved}, {"user_id", user}};
}

Json Engine::chronicle_query(const std::string& user, std::optional<TimestampMs> from, std::optional<TimestampMs> to,
                             const std::vector<std::string>& streams) const {
    const Chronicle c = store_.load_enriched(user);
    StreamFilter filter;
    for (const auto& s : streams) filter.streams.insert(s);
    const auto events = c.window(from.value_or(std::numeric_limits<TimestampMs>::min()),
                                 to.value_or(std::numeric_limits<TimestampMs>::max()), filter);
    Json arr = Json::array();
    for (const auto& e : events) arr.push_back(to_json(e));
    return Json{{"events", arr}, {"user_id", user}};
}

Json Engine::export_user(const std::string& user) const { return chronicle_query(user, std::nullopt, std::nullopt, {}); }

CooccurrenceMatrix Engine::heatmap_matrix(const std::string& user, const std::string& a, const std::string& b,
                                          std::int64_t window_minutes) const {
    const Chronicle c = store_.load_enriched(user);
    return cooccurrence_matrix(Categorizer::parse(a), Categorizer::parse(b), window_minutes, c);
}

Json Engine::heatmap(const std::string& user, const std::string& a, const std::string& b, std::int64_t window_minutes,
                     std::uint64_t min_support) const {
    const auto m = heatmap_matrix(user, a, b, window_minutes);
    Json candidates = Json::array();
    for (const auto& cand : generate_candidates(m, min_support)) candidates.push_back(to_json(cand));
    Json j = to_json(m);
    j["candidates"] = candidates;
    j["min_support"] = min_support;
    return j;
}

Json Engine::verify(const std::string& user, const Json& hypothesis) const {
    const Hypothesis h = hypothesis_from_json(hypothesis);
    const Chronicle c = store_.load_enriched(user);
    return to_json(pfm::verify(h, c, config_.verify_options()));
}

Json Engine::build_model(const std::string& user) {
    const Chronicle c = store_.load_enriched(user);
    const auto rulebase = load_rulebase((options_.data_dir / "config" / "knowledge_rules.json").string());
    const auto model = pfm::build_model(c, rulebase, store_.load_constraints(user), config_);
    std::lock_guard lock(store_.user_mutex(user));
    store_.save_model(user, model);
    return model_summary(model);
}

Json Engine::show_model(const std::string& user) const {
    auto m = store_.load_model(user);
    if (!m) fail(ErrorCode::NoModel, "no model built for user " + user);
    return to_json(*m);
}

Json Engine::profile(const std::string& user) const {
    Json arr = Json::array();
    for (const auto& c : store_.load_constraints(user)) arr.push_back(to_json(c));
    return Json{{"constraints", arr}, {"user_id", user}};
}

Json Engine::set_profile(const std::string& user, const Json& body) {
    if (!body.is_object() || !body.contains("constraints") || !body["constraints"].is_array()) {
        fail(ErrorCode::SchemaError, "profile needs a 'constraints' array");
    }
    std::vector<StaticConstraint> constraints;
    for (const auto& c : body["constraints"]) constraints.push_back(static_constraint_from_json(c));
    {
        std::lock_guard lock(store_.user_mutex(user));
        store_.save_constraints(user, constraints);
    }
    return profile(user);
}

void Engine::complete_candidates(RecommendationRequest& r) {
    const auto& reg = registry();
    const TasteCatalog* catalog = reg.taste_catalog();
    for (auto& c : r.candidates) {
        if (catalog) {
            const std::string key = normalize_dish_name(c.dish_id);
            if (!c.region) c.region = catalog->region_for(key);
            // Recipe ingredients are always added: a partial list from the
            // caller must not hide an allergen the recipe is known to contain.
            if (const auto* recipe = catalog->recipe_for(key)) {
                for (const auto& part : *recipe) {
                    const std::string name = normalize_dish_name(part.item_id);
                    if (std::find(c.ingredients.begin(), c.ingredients.end(), name) == c.ingredients.end()) {
                        c.ingredients.push_back(name);
                    }
                }
            }
        }
        if (!c.nutrition) {
            FoodEvent probe;
            probe.event_id = "candidate:" + c.dish_id;
            probe.user_id = r.user_id.empty() ? "candidate" : r.user_id;
            probe.dish = c.dish_id;
            probe.quantity_g = c.quantity_g;
            probe.start_ms = r.context.at;
            probe.logged_ms = r.context.at;
            try {
                auto rec = reg.enrich(probe);
                c.nutrition = rec.nutrition;
                if (!c.region) c.region = rec.taste;
            } catch (const Error& e) {
                if (e.code() != ErrorCode::UnresolvedFood) throw;
            }
        }
    }
}

Json Engine::recommend(const std::string& user, const Json& request) {
    auto req = recommendation_request_from_json(request, config_);
    if (req.user_id.empty()) req.user_id = user;
    if (req.user_id != user) fail(ErrorCode::InvalidArgument, "request user does not match '" + user + "'");
    auto model = store_.load_model(user);
    if (!model) fail(ErrorCode::NoModel, "no model built for user " + user);
    // The current profile wins over the constraints captured at build time.
    if (fs::exists(store_.user_dir(user) / "profile.json")) {
        model->constraints = store_.load_constraints(user);
        std::sort(model->constraints.begin(), model->constraints.end(),
                  [](const StaticConstraint& a, const StaticConstraint& b) { return a.item_id < b.item_id; });
    }
    req.context = fill_confounders(req.context, *model, store_.load_enriched(user));
    complete_candidates(req);
    return to_json(pfm::recommend(req, &*model, config_));
}

Json Engine::substitutes(const std::string& user, const Json& request) {
    const auto model = store_.load_model(user);
    if (!model) fail(ErrorCode::NoModel, "no model built for user " + user);
    if (!model->preference) fail(ErrorCode::NoProfile, "model of " + user + " has no preference profile");
    RecommendationRequest probe;
    probe.user_id = user;
    std::string health_key;
    std::size_t k = 5;
    try {
        probe.candidates.push_back(DishCandidate{normalize_dish_name(request.at("target").get<std::string>()), {}, {}, {}, {}});
        for (const auto& c : request.at("candidates")) {
            probe.candidates.push_back(DishCandidate{normalize_dish_name(c.get<std::string>()), {}, {}, {}, {}});
        }
        health_key = request.at("health_key").get<std::string>();
        k = request.value("k", k);
    } catch (const Json::exception& e) {
        fail(ErrorCode::SchemaError, std::string("substitute request: ") + e.what());
    }
    complete_candidates(probe);
    std::vector<FoodCandidate> pool;
    for (const auto& c : probe.candidates) {
        if (!c.region || !c.nutrition) fail(ErrorCode::UnresolvedFood, "no taste or nutrition for '" + c.dish_id + "'");
        pool.push_back(FoodCandidate{c.dish_id, *c.region, *c.nutrition});
    }
    const FoodCandidate target = pool.front();
    pool.erase(pool.begin());
    Json ranked = Json::array();
    for (const auto& s : substitute_search(target, pool, *model->preference, health_key, k)) ranked.push_back(to_json(s));
    return Json{{"health_key", health_key}, {"ranked", ranked}, {"target", target.item_id}, {"user_id", user}};
}

}  // namespace pfm
