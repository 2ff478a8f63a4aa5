#pragma once

#include "uta/environment/database.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace uta::env {

struct SyntheticOmicsOptions {
    int patients = 60;
    std::vector<std::string> cancer_types{"BRCA", "LUAD", "COAD", "KIRC"};
    int features_per_table = 4;
    std::uint64_t seed = 1;
};

/// A small multi-omics style database: clinical, mrna, mirna, methylation
/// and cnv tables keyed by patient_id, plus a cancer_types lookup table
/// without patient rows. Values are rounded so rendered text is stable.
DatabaseHandle synthetic_omics(const SyntheticOmicsOptions& options = {});

}  // namespace uta::env
