#include "uta/evaluation/evaluation.hpp"

#include "uta/environment/csv.hpp"
#include "uta/error.hpp"
#include "uta/rewards/rewards.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <numeric>

namespace uta::eval {

using nlohmann::json;

json to_json(const ClaimRecord& c) { return json{{"text", c.text}, {"correct", c.correct}, {"useful", c.useful}}; }

ClaimRecord claim_from_json(const json& j) {
    ClaimRecord c;
    c.text = j.value("text", std::string{});
    c.correct = j.at("correct").get<bool>();
    c.useful = j.value("useful", false);
    return c;
}

QualitySummary aggregate_quality(std::span<const ClaimRecord> claims) {
    QualitySummary q;
    q.claims = static_cast<std::int64_t>(claims.size());
    if (claims.empty()) {
        q.undefined = true;
        return q;
    }
    std::int64_t correct = 0;
    std::int64_t useful = 0;
    for (const auto& c : claims) {
        correct += c.correct ? 1 : 0;
        useful += c.useful ? 1 : 0;
    }
    q.correct_ratio = static_cast<double>(correct) / static_cast<double>(q.claims);
    q.useful_ratio = static_cast<double>(useful) / static_cast<double>(q.claims);
    return q;
}

std::vector<double> rejection_curve(std::span<const ScoredItem> items, Ordering ordering) {
    const std::size_t n = items.size();
    if (n == 0) {
        throw DomainError("rejection curve needs at least one item");
    }
    double total = 0.0;
    for (const auto& it : items) total += it.quality;
    if (ordering == Ordering::random) {
        return std::vector<double>(n, total / static_cast<double>(n));
    }

    // Rejection order: worst first.
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    if (ordering == Ordering::by_uncertainty) {
        std::stable_sort(order.begin(), order.end(),
                         [&](std::size_t a, std::size_t b) { return items[a].uncertainty > items[b].uncertainty; });
    } else {
        std::stable_sort(order.begin(), order.end(),
                         [&](std::size_t a, std::size_t b) { return items[a].quality < items[b].quality; });
    }

    // Items tied on the sort key are rejected in random order; use the
    // expectation, i.e. every member of a tie group carries the group mean.
    auto key = [&](std::size_t i) {
        return ordering == Ordering::by_uncertainty ? items[i].uncertainty : items[i].quality;
    };
    std::vector<double> q(n);
    for (std::size_t b = 0; b < n;) {
        std::size_t e = b;
        double s = 0.0;
        while (e < n && key(order[e]) == key(order[b])) s += items[order[e++]].quality;
        for (std::size_t i = b; i < e; ++i) q[i] = s / static_cast<double>(e - b);
        b = e;
    }

    std::vector<double> curve(n);
    // Suffix sums keep each point a direct mean of the kept items.
    std::vector<double> suffix(n + 1, 0.0);
    for (std::size_t i = n; i-- > 0;) suffix[i] = suffix[i + 1] + q[i];
    for (std::size_t k = 0; k < n; ++k) {
        curve[k] = suffix[k] / static_cast<double>(n - k);
    }
    return curve;
}

double curve_auc(std::span<const double> curve) {
    if (curve.empty()) return 0.0;
    return std::accumulate(curve.begin(), curve.end(), 0.0) / static_cast<double>(curve.size());
}

std::optional<double> prr(std::span<const ScoredItem> items) {
    if (items.size() < 2) return std::nullopt;
    const double unc = curve_auc(rejection_curve(items, Ordering::by_uncertainty));
    const double orc = curve_auc(rejection_curve(items, Ordering::oracle));
    const double rnd = curve_auc(rejection_curve(items, Ordering::random));
    const double denom = orc - rnd;
    if (std::abs(denom) <= 1e-12) return std::nullopt;
    return (unc - rnd) / denom;
}

std::optional<double> c_index(std::span<const SurvivalRecord> records) {
    double concordant = 0.0;
    std::int64_t comparable = 0;
    for (std::size_t i = 0; i < records.size(); ++i) {
        for (std::size_t j = i + 1; j < records.size(); ++j) {
            const SurvivalRecord* shorter = &records[i];
            const SurvivalRecord* longer = &records[j];
            if (longer->time < shorter->time) std::swap(shorter, longer);
            if (shorter->time == longer->time || !shorter->event) continue;
            ++comparable;
            if (shorter->score < longer->score) {
                concordant += 1.0;
            } else if (shorter->score == longer->score) {
                concordant += 0.5;
            }
        }
    }
    if (comparable == 0) return std::nullopt;
    return concordant / static_cast<double>(comparable);
}

std::optional<double> pearson(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) {
        throw DomainError("pearson needs equal-length inputs");
    }
    const std::size_t n = a.size();
    if (n < 2) return std::nullopt;
    const double ma = std::accumulate(a.begin(), a.end(), 0.0) / static_cast<double>(n);
    const double mb = std::accumulate(b.begin(), b.end(), 0.0) / static_cast<double>(n);
    double sab = 0.0, saa = 0.0, sbb = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        sab += (a[i] - ma) * (b[i] - mb);
        saa += (a[i] - ma) * (a[i] - ma);
        sbb += (b[i] - mb) * (b[i] - mb);
    }
    if (saa == 0.0 || sbb == 0.0) return std::nullopt;
    return sab / std::sqrt(saa * sbb);
}

std::vector<ClaimRecord> mock_claims(const env::DatabaseHandle& db, std::string_view summary,
                                     const std::set<std::string>& tables_touched) {
    std::vector<ClaimRecord> out;
    for (auto& line : rewards::summary_lines(summary)) {
        ClaimRecord c;
        const auto fact = rewards::parse_fact_line(line);
        c.correct = fact && rewards::fact_grounded(db, *fact);
        c.useful = c.correct && tables_touched.count(fact->table) > 0;
        c.text = std::move(line);
        out.push_back(std::move(c));
    }
    return out;
}

namespace {

double parse_number(const std::string& s, const std::string& where) {
    double v = 0.0;
    const auto* end = s.data() + s.size();
    const auto [ptr, ec] = std::from_chars(s.data(), end, v);
    if (ec != std::errc() || ptr != end || !std::isfinite(v)) {
        throw DataError(where + ": not a finite number: '" + s + "'");
    }
    return v;
}

}  // namespace

std::vector<SurvivalRecord> read_survival_csv(const std::string& path) {
    const auto rows = env::read_csv_file(path);
    if (rows.empty()) {
        throw DataError(path + ": missing header");
    }
    const auto& header = rows.front().fields;
    auto col = [&](const char* name) {
        const auto it = std::find(header.begin(), header.end(), name);
        if (it == header.end()) throw DataError(path + ": missing column '" + name + "'");
        return static_cast<std::size_t>(it - header.begin());
    };
    const std::size_t ci = col("id"), cs = col("score"), ct = col("time"), ce = col("event");
    std::vector<SurvivalRecord> out;
    for (std::size_t r = 1; r < rows.size(); ++r) {
        const auto& f = rows[r].fields;
        const std::string where = path + ":" + std::to_string(rows[r].line);
        SurvivalRecord rec;
        rec.id = f[ci];
        rec.score = parse_number(f[cs], where);
        rec.time = parse_number(f[ct], where);
        const std::string& ev = f[ce];
        if (ev == "1" || ev == "true") {
            rec.event = true;
        } else if (ev == "0" || ev == "false") {
            rec.event = false;
        } else {
            throw DataError(where + ": event must be 0/1 or true/false");
        }
        out.push_back(std::move(rec));
    }
    return out;
}

}  // namespace uta::eval
