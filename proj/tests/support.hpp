#pragma once

#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include <fmt/format.h>

#include "valign/survey.hpp"

namespace valign::test {

inline std::filesystem::path data_path(const std::string& name) {
    return std::filesystem::path(VALIGN_DATA_DIR) / name;
}

inline std::filesystem::path fixture_path(const std::string& name) {
    return std::filesystem::path(VALIGN_FIXTURE_DIR) / name;
}

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
public:
    explicit TempDir(const std::string& tag) {
        std::random_device rd;
        path_ = std::filesystem::temp_directory_path() /
                fmt::format("valign-{}-{:016x}", tag, (std::uint64_t{rd()} << 32) | rd());
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    const std::filesystem::path& path() const { return path_; }
    std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

private:
    std::filesystem::path path_;
};

inline std::vector<std::string> ids(std::size_t n) {
    std::vector<std::string> out;
    for (std::size_t i = 0; i < n; ++i) out.push_back(fmt::format("q{}", i + 1));
    return out;
}

/// Uniform random matrix; each cell is missing with probability p_missing.
inline ResponseMatrix random_matrix(std::mt19937_64& rng, std::size_t rows, std::size_t cols,
                                    double p_missing = 0.0, int scale_max = 5,
                                    MatrixSource source = HumanPopulation{"RND"}) {
    std::vector<Scale> scales(cols, Scale{1, scale_max});
    std::uniform_int_distribution<int> value(1, scale_max);
    std::bernoulli_distribution missing(p_missing);
    std::vector<std::vector<Cell>> cells(rows, std::vector<Cell>(cols));
    for (auto& row : cells)
        for (auto& c : row)
            if (!missing(rng)) c = value(rng);
    return ResponseMatrix(std::move(source), ids(cols), std::move(scales), std::move(cells));
}

inline ResponseMatrix matrix_of(std::vector<std::vector<Cell>> rows, std::vector<Scale> scales,
                                MatrixSource source = HumanPopulation{"T"}) {
    const std::size_t cols = scales.size();
    return ResponseMatrix(std::move(source), ids(cols), std::move(scales), std::move(rows));
}

}  // namespace valign::test
