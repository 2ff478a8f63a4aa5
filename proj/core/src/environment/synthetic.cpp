#include "uta/environment/synthetic.hpp"

#include "uta/rng.hpp"

#include <cmath>
#include <cstdio>

namespace uta::env {

namespace {

double round_to(double v, int digits) {
    const double f = std::pow(10.0, digits);
    return std::round(v * f) / f;
}

std::string patient_id(int i) {
    char buf[16];
    std::snprintf(buf, sizeof buf, "P%04d", i);
    return buf;
}

TableData long_table(const std::string& name, const std::string& key_col, const std::string& key_desc,
                     const std::string& value_col, const std::string& value_desc, const std::string& prefix,
                     int n_patients, int n_features, double mean, double sd, int digits, Rng& rng) {
    TableData t;
    t.name = name;
    t.columns = {{"patient_id", "TEXT", "Patient identifier"},
                 {key_col, "TEXT", key_desc},
                 {value_col, "NUMERIC", value_desc}};
    for (int p = 0; p < n_patients; ++p) {
        for (int f = 0; f < n_features; ++f) {
            t.rows.push_back({patient_id(p), prefix + std::to_string(f + 1), round_to(rng.normal(mean, sd), digits)});
        }
    }
    return t;
}

}  // namespace

DatabaseHandle synthetic_omics(const SyntheticOmicsOptions& o) {
    Rng rng(o.seed);
    DatabaseBuilder b;

    TableData types;
    types.name = "cancer_types";
    types.columns = {{"cancer_type", "TEXT", "Cancer type code"}, {"description", "TEXT", "Full name"}};
    for (const auto& c : o.cancer_types) {
        types.rows.push_back({c, "cancer type " + c});
    }
    b.add_table(std::move(types));

    TableData clinical;
    clinical.name = "clinical";
    clinical.columns = {{"patient_id", "TEXT", "Patient identifier"},
                        {"cancer_type", "TEXT", "Cancer type code"},
                        {"age", "NUMERIC", "Age at diagnosis in years"},
                        {"survival_days", "NUMERIC", "Observed survival time in days"},
                        {"event", "NUMERIC", "1 if death was observed"}};
    for (int p = 0; p < o.patients; ++p) {
        const auto& ct = o.cancer_types[static_cast<std::size_t>(p) % o.cancer_types.size()];
        const std::int64_t age = 35 + static_cast<std::int64_t>(rng.uniform_index(45));
        const std::int64_t days = 30 + static_cast<std::int64_t>(rng.uniform_index(3000));
        const std::int64_t event = rng.uniform01() < 0.6 ? 1 : 0;
        clinical.rows.push_back({patient_id(p), ct, age, days, event});
    }
    b.add_table(std::move(clinical));

    const int nf = o.features_per_table;
    b.add_table(long_table("mrna", "gene", "Gene symbol", "expression", "log2 expression", "GENE", o.patients, nf, 6.0,
                           2.0, 2, rng));
    b.add_table(long_table("mirna", "mirna", "miRNA name", "expression", "log2 expression", "MIR", o.patients, nf, 4.0,
                           1.5, 2, rng));
    b.add_table(long_table("methylation", "site", "CpG site", "beta", "Methylation beta value", "CG", o.patients, nf,
                           0.5, 0.15, 3, rng));
    b.add_table(long_table("cnv", "region", "Genomic region", "copy_number", "Copy number estimate", "REG", o.patients,
                           nf, 2.0, 0.5, 2, rng));
    return b.finish();
}

}  // namespace uta::env
