#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "valign/survey.hpp"

namespace valign {

enum class MsdMode { sample_vs_mean, mean_vs_mean };
enum class Normalization { raw, per_sqrt_n };
enum class KlDirection { model_to_human, human_to_model };

std::string_view to_string(MsdMode mode);
std::string_view to_string(Normalization norm);
std::string_view to_string(KlDirection dir);
MsdMode parse_msd_mode(std::string_view text);
Normalization parse_normalization(std::string_view text);
KlDirection parse_kl_direction(std::string_view text);

/// A metric averaged over questions, with the number of questions that
/// entered the average and the number skipped for lack of valid answers.
struct QuestionAverage {
    double value = 0.0;
    std::size_t questions_used = 0;
    std::size_t questions_excluded = 0;
};

/// Mean squared difference of unit-scaled answers to the human per-question
/// mean. sample_vs_mean averages over every model sample; mean_vs_mean
/// compares the two means. Throws DataError when no question is usable.
QuestionAverage msd_detail(const ResponseMatrix& model, const ResponseMatrix& human,
                           MsdMode mode = MsdMode::sample_vs_mean);
double msd(const ResponseMatrix& model, const ResponseMatrix& human,
           MsdMode mode = MsdMode::sample_vs_mean);

struct CategoricalDistribution {
    std::string question_id;
    Scale scale;
    std::vector<double> probabilities;  // index v - scale.min
};

/// (count(v) + alpha) / (n_valid + alpha * K). Throws DataError when the
/// column has no valid answer or alpha < 0.
CategoricalDistribution answer_distribution(const ResponseMatrix& matrix, std::size_t column,
                                            double alpha);

/// sum_v p(v) ln(p(v) / q(v)) in nats. Terms with p(v) = 0 contribute 0;
/// p(v) > 0 with q(v) = 0 throws DataError.
double kl_divergence(std::span<const double> p, std::span<const double> q);

/// Per-question KL(model || human) (or the reverse) with the same additive
/// smoothing on both sides, averaged over usable questions.
QuestionAverage kld_detail(const ResponseMatrix& model, const ResponseMatrix& human, double alpha,
                           KlDirection direction = KlDirection::model_to_human);
double kld(const ResponseMatrix& model, const ResponseMatrix& human, double alpha,
           KlDirection direction = KlDirection::model_to_human);

enum class EntryFlag : std::uint8_t { valid, insufficient_pairs, zero_variance };

std::string_view to_string(EntryFlag flag);

/// Symmetric question x question Pearson matrix. Flagged entries hold 0.
class CorrelationMatrix {
public:
    CorrelationMatrix() = default;
    /// Builds from explicit row-major entries, all flagged valid. Throws
    /// DataError if the values are not square, symmetric or within [-1, 1].
    static CorrelationMatrix from_entries(std::vector<std::string> question_ids,
                                          std::vector<double> entries);
    /// Builds from entries, flags and pair counts (all row-major n x n).
    /// Flags and counts must be symmetric; flagged entries must be 0.
    static CorrelationMatrix from_parts(std::vector<std::string> question_ids,
                                        std::vector<double> entries, std::vector<EntryFlag> flags,
                                        std::vector<std::size_t> pairs);

    std::size_t size() const noexcept { return ids_.size(); }
    const std::vector<std::string>& question_ids() const noexcept { return ids_; }
    double at(std::size_t i, std::size_t j) const { return entries_[i * size() + j]; }
    EntryFlag flag(std::size_t i, std::size_t j) const { return flags_[i * size() + j]; }
    std::size_t pairs(std::size_t i, std::size_t j) const { return pairs_[i * size() + j]; }
    std::span<const double> entries() const noexcept { return entries_; }

    /// Flagged entries in the upper triangle including the diagonal.
    std::size_t flagged_count() const;

private:
    friend CorrelationMatrix correlation_matrix(const ResponseMatrix&, std::size_t);

    std::vector<std::string> ids_;
    std::vector<double> entries_;
    std::vector<EntryFlag> flags_;
    std::vector<std::size_t> pairs_;
};

/// Pairwise-complete Pearson over rows where both questions are answered.
/// Entries with fewer than min_pairs complete pairs (or fewer than 2) are
/// flagged insufficient_pairs; pairs with no variance on the shared rows
/// are flagged zero_variance. Both are stored as 0.
CorrelationMatrix correlation_matrix(const ResponseMatrix& matrix, std::size_t min_pairs = 10);

/// Frobenius norm including the diagonal; per_sqrt_n divides by sqrt(n).
double corr_norm(const CorrelationMatrix& c, Normalization norm = Normalization::per_sqrt_n);

struct DistanceDetail {
    double value = 0.0;
    std::size_t questions = 0;     // n after restriction
    std::size_t masked_pairs = 0;  // off-diagonal pairs flagged on either side
};

/// Frobenius norm of A - B over the question ids both matrices share (in
/// A's order), dropping questions whose diagonal is flagged on either side
/// and masking off-diagonal entries flagged on either side. Throws
/// DataError when nothing remains.
DistanceDetail corr_distance_detail(const CorrelationMatrix& a, const CorrelationMatrix& b,
                                    Normalization norm = Normalization::per_sqrt_n);
double corr_distance(const CorrelationMatrix& a, const CorrelationMatrix& b,
                     Normalization norm = Normalization::per_sqrt_n);

/// Product-moment correlation. Throws DataError on length mismatch, fewer
/// than two points, or zero variance.
double pearson(std::span<const double> x, std::span<const double> y);
/// Average ranks (1-based); ties share the mean of their rank span.
std::vector<double> average_ranks(std::span<const double> x);
double spearman(std::span<const double> x, std::span<const double> y);
/// Pearson against a 0/1 indicator. Throws DataError if the indicator is
/// not binary or holds a single class.
double point_biserial(std::span<const int> indicator, std::span<const double> values);

struct AlignmentOptions {
    double alpha = 0.5;
    Normalization normalization = Normalization::per_sqrt_n;
    std::size_t min_pairs = 10;
    KlDirection kl_direction = KlDirection::model_to_human;
};

struct ReportDescriptor {
    std::string model;
    std::string language;
    std::string style;
    std::string decoding;
    std::string country;
};

struct AlignmentReport {
    ReportDescriptor config;
    double msd = 0.0;       // sample_vs_mean
    double msd_mean = 0.0;  // mean_vs_mean
    double kld = 0.0;
    // Absent when one side has fewer than two rows.
    std::optional<double> corr_norm_model;
    std::optional<double> corr_norm_human;
    std::optional<double> corr_distance;

    std::size_t sessions = 0;
    std::size_t excluded_sessions = 0;
    std::size_t human_respondents = 0;
    std::size_t questions_used = 0;
    std::size_t extraction_failures = 0;
    std::size_t refusals = 0;
    std::size_t out_of_range = 0;
    std::size_t no_integer = 0;
    std::size_t ambiguous = 0;
    std::size_t corr_flagged_model = 0;
    std::size_t corr_flagged_human = 0;
    std::size_t corr_masked_pairs = 0;
};

/// All alignment metrics of a model matrix against a human matrix. The
/// extraction counters are left for the caller to fill.
AlignmentReport compute_alignment(const ResponseMatrix& model, const ResponseMatrix& human,
                                  const AlignmentOptions& options,
                                  const ReportDescriptor& descriptor = {});

}  // namespace valign
