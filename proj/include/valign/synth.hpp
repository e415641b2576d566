#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "valign/metrics.hpp"
#include "valign/survey.hpp"

namespace valign {

struct SynthQuestion {
    std::string id;
    Scale scale;
    std::vector<double> marginal;  // probability of scale.min .. scale.max
};

/// A Gaussian-copula population: latent standard normals with the given
/// correlation, discretised per question at its marginal's cumulative
/// probabilities.
struct PopulationSpec {
    std::string country = "SYN";
    std::vector<SynthQuestion> questions;
    std::vector<double> latent_correlation;  // row-major n x n; empty means identity
    std::size_t n_respondents = 0;
    std::uint64_t seed = 0;

    /// Throws DataError for malformed marginals, a non-unit diagonal,
    /// asymmetric or out-of-range entries, or a matrix whose smallest
    /// eigenvalue is below -1e-8 (the message carries that eigenvalue).
    void validate() const;

    static PopulationSpec from_json(const nlohmann::json& doc);
    static PopulationSpec load(const std::filesystem::path& path);
};

/// Block latent correlation: `rho` within each consecutive block, 0 across.
std::vector<double> block_correlation(std::size_t n, std::size_t block_size, double rho);

/// Deterministic given spec.seed.
ResponseMatrix make_population(const PopulationSpec& spec);

/// Brute-force Pearson per pair over pairwise-complete rows with a
/// two-pass mean/covariance formula. Flags follow the same rules as the
/// production routine but the arithmetic is independent of it.
CorrelationMatrix oracle_correlation(const ResponseMatrix& matrix, std::size_t min_pairs = 10);

struct SeparationReport {
    std::size_t n = 0;
    std::uint64_t seed = 0;
    double msd_mean = 0.0;       // mean_vs_mean
    double msd_sample = 0.0;     // sample_vs_mean
    double kld = 0.0;            // alpha 0.5, model_to_human
    double corr_distance = 0.0;  // per_sqrt_n
};

/// Two populations with identical marginals: A with latent correlation 0.6
/// inside two 10-question blocks, B independent.
SeparationReport separation_experiment(std::size_t n, std::uint64_t seed);

}  // namespace valign
