#include "pfm/heatmap.hpp"

#include "pfm/error.hpp"
#include "pfm/pattern.hpp"

#include <algorithm>
#include <map>
#include <set>
#include <sstream>

namespace pfm {

namespace {

std::string fmt_edge(double x) { return num(x).dump(); }

std::string csv_field(const std::string& s) {
    if (s.find_first_of(",\"\n\r") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += '"';
        out += c;
    }
    return out + "\"";
}

}  // namespace

Categorizer Categorizer::parse(const std::string& spec) {
    Categorizer c;
    const auto dot = spec.find('.');
    c.stream = spec.substr(0, dot);
    if (c.stream != "food" && !valid_stream_label(c.stream)) {
        fail(ErrorCode::InvalidArgument, "unknown stream '" + c.stream + "'");
    }
    if (dot == std::string::npos) {
        if (c.stream == "food") c.attr = "dish";
        else if (c.stream == "sleep") c = Categorizer{c.stream, "sleep_quality", {60, 75}};
        else if (c.stream == "exercise") c = Categorizer{c.stream, "duration_min", {30, 60}};
        else if (c.stream == "steps") c = Categorizer{c.stream, "steps", {5000, 10000}};
        else if (c.stream == "stress") c = Categorizer{c.stream, "stress_level", {33, 66}};
        else c.attr = "stream";
        return c;
    }
    std::string rest = spec.substr(dot + 1);
    const auto colon = rest.find(':');
    c.attr = rest.substr(0, colon);
    if (c.attr.empty()) fail(ErrorCode::InvalidArgument, "empty attribute in '" + spec + "'");
    if (colon != std::string::npos) {
        std::stringstream ss(rest.substr(colon + 1));
        std::string tok;
        while (std::getline(ss, tok, ',')) {
            try {
                std::size_t used = 0;
                c.edges.push_back(std::stod(tok, &used));
                if (used != tok.size()) throw std::invalid_argument(tok);
            } catch (const std::exception&) {
                fail(ErrorCode::InvalidArgument, "bad bin edge '" + tok + "' in '" + spec + "'");
            }
        }
        if (c.edges.empty() || !std::is_sorted(c.edges.begin(), c.edges.end()) ||
            std::adjacent_find(c.edges.begin(), c.edges.end()) != c.edges.end()) {
            fail(ErrorCode::InvalidArgument, "bin edges must be strictly ascending in '" + spec + "'");
        }
    }
    return c;
}

std::string Categorizer::spec() const {
    std::string s = stream + "." + attr;
    if (!edges.empty()) {
        s += ":";
        for (std::size_t i = 0; i < edges.size(); ++i) s += (i ? "," : "") + fmt_edge(edges[i]);
    }
    return s;
}

std::vector<std::string> Categorizer::bin_labels() const {
    std::vector<std::string> out;
    if (edges.empty()) return out;
    out.push_back(attr + "<" + fmt_edge(edges.front()));
    for (std::size_t i = 0; i + 1 < edges.size(); ++i) {
        out.push_back(attr + "[" + fmt_edge(edges[i]) + "," + fmt_edge(edges[i + 1]) + ")");
    }
    out.push_back(attr + ">=" + fmt_edge(edges.back()));
    return out;
}

std::optional<std::string> Categorizer::category(const Event& e) const {
    if (stream_of(e) != stream) return std::nullopt;
    if (binned()) {
        auto v = numeric_attribute(e, attr);
        if (!v) return std::nullopt;
        const auto bin = static_cast<std::size_t>(std::upper_bound(edges.begin(), edges.end(), *v) - edges.begin());
        return bin_labels()[bin];
    }
    if (attr == "stream") return stream;
    if (const auto* f = std::get_if<FoodEvent>(&e)) {
        std::string label;
        if (attr == "dish") label = normalize_dish_name(f->dish);
        else if (attr == "place") label = normalize_dish_name(f->place);
        else if (attr == "social") label = normalize_dish_name(f->social);
        else if (attr == "how") label = std::string(to_string(f->how));
        else if (attr == "item" && !f->items.empty()) label = normalize_dish_name(f->items.front().item_id);
        if (label.empty()) return std::nullopt;
        return label;
    }
    return std::nullopt;
}

CooccurrenceMatrix cooccurrence_matrix(const Categorizer& a, const Categorizer& b, std::int64_t window_minutes,
                                       const Chronicle& c) {
    if (window_minutes <= 0) fail(ErrorCode::InvalidArgument, "window must be > 0");
    const auto events = c.events();
    const std::size_t n = events.size();

    std::vector<std::optional<std::string>> cat_a(n);
    std::vector<std::optional<std::string>> cat_b(n);
    std::set<std::string> seen_a;
    std::set<std::string> seen_b;
    for (std::size_t i = 0; i < n; ++i) {
        cat_a[i] = a.category(events[i]);
        cat_b[i] = b.category(events[i]);
        if (cat_a[i]) seen_a.insert(*cat_a[i]);
        if (cat_b[i]) seen_b.insert(*cat_b[i]);
    }

    CooccurrenceMatrix m;
    m.stream_a = a.spec();
    m.stream_b = b.spec();
    m.window_minutes = window_minutes;
    m.rows = a.binned() ? a.bin_labels() : std::vector<std::string>(seen_a.begin(), seen_a.end());
    m.cols = b.binned() ? b.bin_labels() : std::vector<std::string>(seen_b.begin(), seen_b.end());
    m.counts.assign(m.rows.size(), std::vector<std::uint64_t>(m.cols.size(), 0));

    std::map<std::string, std::size_t> row_of;
    std::map<std::string, std::size_t> col_of;
    for (std::size_t i = 0; i < m.rows.size(); ++i) row_of[m.rows[i]] = i;
    for (std::size_t j = 0; j < m.cols.size(); ++j) col_of[m.cols[j]] = j;

    // prefix[j][p]: events of column j among chronicle positions [0, p).
    std::vector<std::vector<std::uint32_t>> prefix(m.cols.size(), std::vector<std::uint32_t>(n + 1, 0));
    for (std::size_t p = 0; p < n; ++p) {
        for (std::size_t j = 0; j < m.cols.size(); ++j) prefix[j][p + 1] = prefix[j][p];
        if (cat_b[p]) ++prefix[col_of[*cat_b[p]]][p + 1];
    }

    const TimestampMs window_ms = window_minutes * kMinuteMs;
    for (std::size_t i = 0; i < n; ++i) {
        if (!cat_a[i]) continue;
        const TimestampMs limit = start_ms(events[i]) + window_ms;
        const auto ub = static_cast<std::size_t>(
            std::upper_bound(events.begin() + static_cast<std::ptrdiff_t>(i), events.end(), limit,
                             [](TimestampMs t, const Event& e) { return t < start_ms(e); }) -
            events.begin());
        auto& row = m.counts[row_of[*cat_a[i]]];
        for (std::size_t j = 0; j < m.cols.size(); ++j) row[j] += prefix[j][ub] - prefix[j][i + 1];
    }
    return m;
}

std::vector<Candidate> generate_candidates(const CooccurrenceMatrix& m, std::uint64_t min_support) {
    if (min_support < 1) fail(ErrorCode::InvalidArgument, "min_support must be >= 1");
    std::vector<Candidate> out;
    for (std::size_t i = 0; i < m.rows.size(); ++i) {
        for (std::size_t j = 0; j < m.cols.size(); ++j) {
            if (m.counts[i][j] >= min_support) out.push_back(Candidate{i, j, m.rows[i], m.cols[j], m.counts[i][j]});
        }
    }
    std::stable_sort(out.begin(), out.end(), [](const Candidate& x, const Candidate& y) {
        if (x.count != y.count) return x.count > y.count;
        if (x.row != y.row) return x.row < y.row;
        return x.col < y.col;
    });
    return out;
}

Json to_json(const CooccurrenceMatrix& m) {
    return Json{{"cols", m.cols},
                {"counts", m.counts},
                {"rows", m.rows},
                {"stream_a", m.stream_a},
                {"stream_b", m.stream_b},
                {"window_minutes", m.window_minutes}};
}

std::string to_csv(const CooccurrenceMatrix& m) {
    std::string out;
    for (const auto& col : m.cols) out += "," + csv_field(col);
    out += "\n";
    for (std::size_t i = 0; i < m.rows.size(); ++i) {
        out += csv_field(m.rows[i]);
        for (auto v : m.counts[i]) out += "," + std::to_string(v);
        out += "\n";
    }
    return out;
}

Json to_json(const Candidate& c) {
    return Json{{"col", c.col_label}, {"count", c.count}, {"row", c.row_label}};
}

}  // namespace pfm
