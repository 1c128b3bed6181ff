#pragma once

#include "pfm/chronicle.hpp"
#include "pfm/json.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace pfm {

// Maps events of one stream to heatmap categories, either by a string
// attribute or by binning a numeric one.
struct Categorizer {
    std::string stream;
    std::string attr;
    std::vector<double> edges;  // ascending; empty = label categories

    /// "food", "food.dish", "sleep.sleep_quality:60,75". A bare stream picks
    /// its default attribute.
    static Categorizer parse(const std::string& spec);

    std::string spec() const;
    bool binned() const { return !edges.empty(); }
    std::optional<std::string> category(const Event& e) const;
    /// All bin labels in order (binned categorizers only).
    std::vector<std::string> bin_labels() const;
};

struct CooccurrenceMatrix {
    std::string stream_a;
    std::string stream_b;
    std::int64_t window_minutes = 0;
    std::vector<std::string> rows;
    std::vector<std::string> cols;
    std::vector<std::vector<std::uint64_t>> counts;  // rows x cols
};

/// counts[i][j] = number of (a, b) pairs, b after a in chronicle order,
/// a in category i, b in category j, 0 <= start(b) - start(a) <= window.
CooccurrenceMatrix cooccurrence_matrix(const Categorizer& a, const Categorizer& b, std::int64_t window_minutes,
                                       const Chronicle& c);

struct Candidate {
    std::size_t row = 0;
    std::size_t col = 0;
    std::string row_label;
    std::string col_label;
    std::uint64_t count = 0;

    bool operator==(const Candidate&) const = default;
};

/// Cells with count >= min_support, by count descending, then row, then column.
std::vector<Candidate> generate_candidates(const CooccurrenceMatrix& m, std::uint64_t min_support);

Json to_json(const CooccurrenceMatrix& m);
std::string to_csv(const CooccurrenceMatrix& m);
Json to_json(const Candidate& c);

}  // namespace pfm
