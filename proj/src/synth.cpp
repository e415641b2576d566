#include "valign/synth.hpp"

#include <cmath>
#include <fstream>
#include <numbers>
#include <random>

#include <Eigen/Dense>
#include <fmt/format.h>

#include "valign/error.hpp"

namespace valign {

using nlohmann::json;

void PopulationSpec::validate() const {
    const std::size_t n = questions.size();
    if (n == 0) throw DataError("population spec has no questions");
    if (n_respondents == 0) throw DataError("population spec needs n_respondents > 0");
    for (const auto& q : questions) {
        if (q.scale.max <= q.scale.min)
            throw DataError(fmt::format("question '{}': degenerate scale", q.id));
        if (q.marginal.size() != static_cast<std::size_t>(q.scale.size()))
            throw DataError(fmt::format("question '{}': marginal has {} entries, scale has {}", q.id,
                                        q.marginal.size(), q.scale.size()));
        double total = 0.0;
        for (double p : q.marginal) {
            if (!(p >= 0.0)) throw DataError(fmt::format("question '{}': negative marginal", q.id));
            total += p;
        }
        if (std::abs(total - 1.0) > 1e-9)
            throw DataError(fmt::format("question '{}': marginal sums to {}", q.id, total));
    }
    if (latent_correlation.empty()) return;
    if (latent_correlation.size() != n * n)
        throw DataError(fmt::format("latent correlation has {} entries, expected {}x{}",
                                    latent_correlation.size(), n, n));
    Eigen::MatrixXd m(n, n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) {
            const double v = latent_correlation[i * n + j];
            if (i == j && v != 1.0)
                throw DataError(fmt::format("latent correlation diagonal ({0},{0}) is {1}, expected 1", i, v));
            if (!(v >= -1.0 && v <= 1.0))
                throw DataError(fmt::format("latent correlation ({},{}) = {} outside [-1,1]", i, j, v));
            if (v != latent_correlation[j * n + i])
                throw DataError(fmt::format("latent correlation not symmetric at ({},{})", i, j));
            m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = v;
        }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m, Eigen::EigenvaluesOnly);
    const double smallest = es.eigenvalues().minCoeff();
    if (smallest < -1e-8)
        throw DataError(fmt::format("latent correlation is not positive semidefinite: smallest "
                                    "eigenvalue {}",
                                    smallest));
}

PopulationSpec PopulationSpec::from_json(const json& doc) {
    PopulationSpec spec;
    try {
        spec.country = doc.value("country", spec.country);
        spec.n_respondents = doc.at("n_respondents").get<std::size_t>();
        spec.seed = doc.value("seed", std::uint64_t{0});
        for (const json& q : doc.at("questions")) {
            SynthQuestion sq;
            sq.id = q.at("id").get<std::string>();
            sq.scale.min = q.at("scale_min").get<int>();
            sq.scale.max = q.at("scale_max").get<int>();
            if (q.contains("marginal")) {
                sq.marginal = q.at("marginal").get<std::vector<double>>();
            } else if (sq.scale.max > sq.scale.min) {
                sq.marginal.assign(static_cast<std::size_t>(sq.scale.size()), 1.0 / sq.scale.size());
            }
            spec.questions.push_back(std::move(sq));
        }
        if (auto it = doc.find("latent_correlation"); it != doc.end()) {
            for (const json& row : *it) {
                auto r = row.get<std::vector<double>>();
                if (r.size() != spec.questions.size())
                    throw DataError("latent_correlation rows must have one entry per question");
                spec.latent_correlation.insert(spec.latent_correlation.end(), r.begin(), r.end());
            }
        } else if (auto b = doc.find("latent_blocks"); b != doc.end()) {
            spec.latent_correlation = block_correlation(spec.questions.size(),
                                                        b->at("size").get<std::size_t>(),
                                                        b->at("rho").get<double>());
        }
    } catch (const json::exception& e) {
        throw DataError(fmt::format("malformed population spec: {}", e.what()));
    }
    spec.validate();
    return spec;
}

PopulationSpec PopulationSpec::load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw DataError(fmt::format("cannot open population spec '{}'", path.string()));
    json doc;
    try {
        doc = json::parse(in);
    } catch (const json::parse_error& e) {
        throw DataError(fmt::format("population spec '{}' is not valid JSON: {}", path.string(), e.what()));
    }
    return from_json(doc);
}

std::vector<double> block_correlation(std::size_t n, std::size_t block_size, double rho) {
    if (block_size == 0) throw DataError("block size must be positive");
    std::vector<double> out(n * n, 0.0);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j)
            out[i * n + j] = i == j ? 1.0 : (i / block_size == j / block_size ? rho : 0.0);
    return out;
}

namespace {

// Standard normals by Box-Muller over a 64-bit Mersenne Twister, so that the
// stream is fixed by the seed alone and not by the standard library.
class NormalStream {
public:
    explicit NormalStream(std::uint64_t seed) : rng_(seed) {}

    double next() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        double u1;
        do {
            u1 = uniform();
        } while (u1 <= 0.0);
        const double u2 = uniform();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double theta = 2.0 * std::numbers::pi * u2;
        spare_ = r * std::sin(theta);
        have_spare_ = true;
        return r * std::cos(theta);
    }

private:
    double uniform() { return static_cast<double>(rng_() >> 11) * 0x1.0p-53; }

    std::mt19937_64 rng_;
    double spare_ = 0.0;
    bool have_spare_ = false;
};

}  // namespace

ResponseMatrix make_population(const PopulationSpec& spec) {
    spec.validate();
    const std::size_t q = spec.questions.size();

    // Factor the latent correlation as L L^T through its eigendecomposition,
    // which also covers singular (PSD but not PD) matrices.
    Eigen::MatrixXd factor = Eigen::MatrixXd::Identity(static_cast<Eigen::Index>(q), static_cast<Eigen::Index>(q));
    if (!spec.latent_correlation.empty()) {
        Eigen::MatrixXd m(q, q);
        for (std::size_t i = 0; i < q; ++i)
            for (std::size_t j = 0; j < q; ++j)
                m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = spec.latent_correlation[i * q + j];
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m);
        const Eigen::VectorXd roots = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
        factor = es.eigenvectors() * roots.asDiagonal();
    }

    std::vector<std::vector<double>> cumulative(q);
    for (std::size_t j = 0; j < q; ++j) {
        double c = 0.0;
        for (double p : spec.questions[j].marginal) cumulative[j].push_back(c += p);
        cumulative[j].back() = 1.0;
    }

    NormalStream normals(spec.seed);
    Eigen::VectorXd e(static_cast<Eigen::Index>(q));
    std::vector<std::vector<Cell>> rows(spec.n_respondents, std::vector<Cell>(q));
    for (auto& row : rows) {
        for (Eigen::Index k = 0; k < e.size(); ++k) e(k) = normals.next();
        const Eigen::VectorXd z = factor * e;
        for (std::size_t j = 0; j < q; ++j) {
            const double u = 0.5 * std::erfc(-z(static_cast<Eigen::Index>(j)) / std::numbers::sqrt2);
            std::size_t v = 0;
            while (v + 1 < cumulative[j].size() && u > cumulative[j][v]) ++v;
            row[j] = spec.questions[j].scale.min + static_cast<int>(v);
        }
    }

    std::vector<std::string> ids;
    std::vector<Scale> scales;
    for (const auto& sq : spec.questions) {
        ids.push_back(sq.id);
        scales.push_back(sq.scale);
    }
    return ResponseMatrix(HumanPopulation{spec.country}, std::move(ids), std::move(scales), std::move(rows));
}

CorrelationMatrix oracle_correlation(const ResponseMatrix& matrix, std::size_t min_pairs) {
    const std::size_t q = matrix.cols();
    const std::size_t needed = min_pairs < 2 ? 2 : min_pairs;
    std::vector<double> entries(q * q, 0.0);
    std::vector<EntryFlag> flags(q * q, EntryFlag::valid);
    std::vector<std::size_t> pairs(q * q, 0);
    for (std::size_t a = 0; a < q; ++a) {
        for (std::size_t b = 0; b < q; ++b) {
            std::vector<double> xs, ys;
            for (std::size_t r = 0; r < matrix.rows(); ++r) {
                const Cell& x = matrix.at(r, a);
                const Cell& y = matrix.at(r, b);
                if (x && y) {
                    xs.push_back(*x);
                    ys.push_back(*y);
                }
            }
            pairs[a * q + b] = xs.size();
            if (xs.size() < needed) {
                flags[a * q + b] = EntryFlag::insufficient_pairs;
                continue;
            }
            double mean_x = 0.0, mean_y = 0.0;
            for (std::size_t i = 0; i < xs.size(); ++i) {
                mean_x += xs[i];
                mean_y += ys[i];
            }
            mean_x /= static_cast<double>(xs.size());
            mean_y /= static_cast<double>(ys.size());
            double cov = 0.0, var_x = 0.0, var_y = 0.0;
            for (std::size_t i = 0; i < xs.size(); ++i) {
                cov += (xs[i] - mean_x) * (ys[i] - mean_y);
                var_x += (xs[i] - mean_x) * (xs[i] - mean_x);
                var_y += (ys[i] - mean_y) * (ys[i] - mean_y);
            }
            if (var_x <= 0.0 || var_y <= 0.0) {
                flags[a * q + b] = EntryFlag::zero_variance;
                continue;
            }
            double r = a == b ? 1.0 : cov / (std::sqrt(var_x) * std::sqrt(var_y));
            if (r > 1.0) r = 1.0;
            if (r < -1.0) r = -1.0;
            entries[a * q + b] = r;
        }
    }
    // Floating point may differ in the last bit between (a,b) and (b,a).
    for (std::size_t a = 0; a < q; ++a)
        for (std::size_t b = a + 1; b < q; ++b) entries[b * q + a] = entries[a * q + b];
    return CorrelationMatrix::from_parts(matrix.question_ids(), std::move(entries), std::move(flags),
                                         std::move(pairs));
}

SeparationReport separation_experiment(std::size_t n, std::uint64_t seed) {
    constexpr std::size_t kQuestions = 20;
    static const std::vector<std::vector<double>> marginals = {
        {0.40, 0.35, 0.15, 0.10},
        {0.10, 0.20, 0.30, 0.25, 0.15},
        {0.25, 0.25, 0.25, 0.25},
        {0.05, 0.10, 0.15, 0.20, 0.20, 0.10, 0.08, 0.06, 0.04, 0.02},
        {0.30, 0.45, 0.25},
    };
    PopulationSpec a;
    a.n_respondents = n;
    a.seed = seed;
    for (std::size_t i = 0; i < kQuestions; ++i) {
        const auto& m = marginals[i % marginals.size()];
        a.questions.push_back({fmt::format("s{:02}", i + 1), Scale{1, static_cast<int>(m.size())}, m});
    }
    a.latent_correlation = block_correlation(kQuestions, 10, 0.6);

    PopulationSpec b = a;
    b.latent_correlation.clear();
    // Derived from the same seed so the experiment has a single entropy source.
    b.seed = std::mt19937_64(seed)() ^ 0x5DEECE66DULL;

    const ResponseMatrix pa = make_population(a);
    const ResponseMatrix pb = make_population(b);

    SeparationReport rep;
    rep.n = n;
    rep.seed = seed;
    rep.msd_mean = msd(pa, pb, MsdMode::mean_vs_mean);
    rep.msd_sample = msd(pa, pb, MsdMode::sample_vs_mean);
    rep.kld = kld(pa, pb, 0.5);
    rep.corr_distance = corr_distance(correlation_matrix(pa), correlation_matrix(pb), Normalization::per_sqrt_n);
    return rep;
}

}  // namespace valign
