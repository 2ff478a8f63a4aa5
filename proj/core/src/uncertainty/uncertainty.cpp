#include "uta/uncertainty/uncertainty.hpp"

#include "uta/error.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <numbers>
#include <sstream>

namespace uta::uq {

using nlohmann::json;

double perplexity(std::span<const double> logprobs) {
    if (logprobs.empty()) {
        throw DomainError("perplexity undefined for an empty logprob list");
    }
    double sum = 0.0;
    for (const double lp : logprobs) {
        if (!(lp <= 0.0)) {
            throw DomainError("logprob must be <= 0, got " + std::to_string(lp));
        }
        sum += lp;
    }
    return std::exp(-sum / static_cast<double>(logprobs.size()));
}

namespace {

std::vector<std::string> lower_tokens(std::string_view text) {
    std::vector<std::string> out;
    std::string cur;
    for (const char ch : text) {
        const auto c = static_cast<unsigned char>(ch);
        if (std::isspace(c) != 0) {
            if (!cur.empty()) {
                out.push_back(std::move(cur));
                cur.clear();
            }
        } else {
            cur.push_back(static_cast<char>(std::tolower(c)));
        }
    }
    if (!cur.empty()) {
        out.push_back(std::move(cur));
    }
    std::sort(out.begin(), out.end());
    return out;
}

}  // namespace

double token_f1(std::string_view a, std::string_view b) {
    const auto ta = lower_tokens(a);
    const auto tb = lower_tokens(b);
    if (ta.empty() && tb.empty()) {
        return 1.0;
    }
    if (ta.empty() || tb.empty()) {
        return 0.0;
    }
    std::vector<std::string> common;
    std::set_intersection(ta.begin(), ta.end(), tb.begin(), tb.end(), std::back_inserter(common));
    if (common.empty()) {
        return 0.0;
    }
    const double p = static_cast<double>(common.size()) / static_cast<double>(ta.size());
    const double r = static_cast<double>(common.size()) / static_cast<double>(tb.size());
    return 2.0 * p * r / (p + r);
}

double consistency(std::string_view star, std::span<const std::string> samples, const SimilarityFn& sim) {
    if (samples.empty()) {
        throw DomainError("consistency needs at least two candidates");
    }
    double total = 0.0;
    for (const auto& s : samples) {
        const double v = sim(s, star);
        if (!(v >= 0.0 && v <= 1.0)) {
            throw DomainError("similarity outside [0, 1]: " + std::to_string(v));
        }
        total += v;
    }
    return 1.0 - total / static_cast<double>(samples.size());
}

double cocoa(double u_perp_star, double u_cons) { return u_perp_star * u_cons; }

double binary_entropy(double p) {
    if (!(p >= 0.0 && p <= 1.0)) {
        throw DomainError("binary_entropy needs p in [0, 1]");
    }
    if (p == 0.0 || p == 1.0) {
        return 0.0;
    }
    return -(p * std::log(p) + (1.0 - p) * std::log(1.0 - p)) / std::numbers::ln2;
}

RetrievalStats retrieval_entropy(std::span<const std::set<std::string>> touched) {
    if (touched.empty()) {
        throw DomainError("retrieval entropy needs K >= 1");
    }
    RetrievalStats out;
    out.k = static_cast<int>(touched.size());
    std::map<std::string, int> counts;
    for (const auto& set : touched) {
        for (const auto& t : set) {
            ++counts[t];
        }
    }
    if (counts.empty()) {
        out.empty_candidates = true;
        return out;
    }
    double sum = 0.0;
    for (const auto& [name, n] : counts) {
        const double p = static_cast<double>(n) / static_cast<double>(out.k);
        out.freq[name] = p;
        sum += binary_entropy(p);
    }
    out.u_ret = sum / static_cast<double>(counts.size());
    return out;
}

RetrievalStats retrieval_entropy(std::span<const env::Trajectory> trajectories) {
    std::vector<std::set<std::string>> sets;
    sets.reserve(trajectories.size());
    for (const auto& t : trajectories) {
        sets.push_back(t.tables_touched());
    }
    return retrieval_entropy(sets);
}

bool UncertaintyReport::has_flag(std::string_view f) const {
    return std::find(flags.begin(), flags.end(), f) != flags.end();
}

UncertaintyReport compute_report(std::span<const env::Trajectory> trajectories, const SimilarityFn& sim) {
    UncertaintyReport r;
    const auto ret = retrieval_entropy(trajectories);
    r.u_ret = ret.u_ret;
    r.freq = ret.freq;
    if (ret.empty_candidates) {
        r.flags.emplace_back("empty-candidates");
    }

    for (std::size_t i = 0; i < trajectories.size(); ++i) {
        const auto& t = trajectories[i];
        if (!t.summary) {
            r.u_perp.emplace_back(std::nullopt);
            continue;
        }
        const double p = perplexity(t.summary->logprobs);
        r.u_perp.emplace_back(p);
        ++r.pool_size;
        if (!r.star_index || p < *r.u_perp[*r.star_index]) {
            r.star_index = i;
        }
    }
    if (!r.star_index) {
        r.flags.emplace_back("no-summary");
        return r;
    }

    const std::string& star = trajectories[*r.star_index].summary->text;
    std::vector<std::string> samples;
    for (std::size_t i = 0; i < trajectories.size(); ++i) {
        if (i != *r.star_index && trajectories[i].summary) {
            samples.push_back(trajectories[i].summary->text);
        }
    }
    if (samples.empty()) {
        r.flags.emplace_back("single-candidate");
        r.u_cons = 1.0;
    } else {
        r.u_cons = consistency(star, samples, sim);
    }
    r.u_cocoa = cocoa(*r.u_perp[*r.star_index], *r.u_cons);
    return r;
}

namespace {

json opt(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

std::optional<double> opt_double(const json& j, const char* key) {
    if (!j.contains(key) || j[key].is_null()) {
        return std::nullopt;
    }
    return j[key].get<double>();
}

}  // namespace

json to_json(const UncertaintyReport& r) {
    json perp = json::array();
    for (const auto& p : r.u_perp) {
        perp.push_back(opt(p));
    }
    return json{{"u_perp", perp},
                {"star_index", r.star_index ? json(*r.star_index) : json(nullptr)},
                {"u_cons", opt(r.u_cons)},
                {"u_cocoa", opt(r.u_cocoa)},
                {"u_ret", r.u_ret},
                {"freq", r.freq},
                {"flags", r.flags},
                {"pool_size", r.pool_size}};
}

UncertaintyReport uncertainty_from_json(const json& j) {
    UncertaintyReport r;
    for (const auto& p : j.at("u_perp")) {
        r.u_perp.push_back(p.is_null() ? std::nullopt : std::optional<double>(p.get<double>()));
    }
    if (j.contains("star_index") && !j["star_index"].is_null()) {
        r.star_index = j["star_index"].get<std::size_t>();
    }
    r.u_cons = opt_double(j, "u_cons");
    r.u_cocoa = opt_double(j, "u_cocoa");
    r.u_ret = j.at("u_ret").get<double>();
    r.freq = j.value("freq", std::map<std::string, double>{});
    r.flags = j.value("flags", std::vector<std::string>{});
    r.pool_size = j.value("pool_size", std::size_t{0});
    return r;
}

}  // namespace uta::uq
