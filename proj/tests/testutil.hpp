#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <string>
#include <unistd.h>
#include <utility>
#include <vector>

#include "dxnat/neuralnet.hpp"
#include "dxnat/raster.hpp"

namespace testutil {

/// Self-deleting scratch directory under the system temp dir.
class TmpDir {
public:
    explicit TmpDir(const std::string& tag) {
        static std::atomic<unsigned> counter{0};
        path_ = std::filesystem::temp_directory_path() /
                ("dxnat_" + tag + "_" + std::to_string(counter.fetch_add(1)) + "_" +
                 std::to_string(static_cast<unsigned>(::getpid())));
        std::filesystem::create_directories(path_);
    }
    ~TmpDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    TmpDir(const TmpDir&) = delete;
    TmpDir& operator=(const TmpDir&) = delete;

    const std::filesystem::path& path() const { return path_; }
    std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

private:
    std::filesystem::path path_;
};

/// Cells of `grid` whose lookup lists `key`.
inline std::vector<std::pair<int, int>> cells_with_key(const dxnat::raster::GridMap& grid,
                                                       const std::string& key) {
    std::vector<std::pair<int, int>> cells;
    for (int r = 0; r < grid.rows; ++r) {
        for (int c = 0; c < grid.cols; ++c) {
            const auto& keys = grid.cell(r, c);
            if (std::find(keys.begin(), keys.end(), key) != keys.end()) cells.emplace_back(r, c);
        }
    }
    return cells;
}

/// Brute-force flood fill: true when every listed cell is 8-connected to the
/// first one through the listed cells only.
inline bool eight_connected(const std::vector<std::pair<int, int>>& cells) {
    if (cells.empty()) return false;
    std::vector<char> seen(cells.size(), 0);
    std::vector<std::size_t> stack{0};
    seen[0] = 1;
    std::size_t reached = 1;
    while (!stack.empty()) {
        const auto [r, c] = cells[stack.back()];
        stack.pop_back();
        for (std::size_t i = 0; i < cells.size(); ++i) {
            if (seen[i]) continue;
            if (std::abs(cells[i].first - r) <= 1 && std::abs(cells[i].second - c) <= 1) {
                seen[i] = 1;
                ++reached;
                stack.push_back(i);
            }
        }
    }
    return reached == cells.size();
}

struct GradCheckResult {
    double max_rel_err = 0.0;
    std::size_t checked = 0;
};

/// Central finite-difference comparison of every parameter gradient, dropout
/// disabled so the loss is a pure function of the parameters. Entries where
/// both sides are below 1e-8 are treated as matching zeros; at h = 1e-5 the
/// difference quotient itself carries absolute noise around 1e-10.
inline GradCheckResult gradient_check(dxnat::nn::Network& net, const dxnat::nn::Tensor& image,
                                      const dxnat::encode::InputVector& features,
                                      const dxnat::encode::OutputVector& target,
                                      double h = 1e-5) {
    using dxnat::nn::cross_entropy;
    net.set_dropout_enabled(false);
    net.forward(image, features, /*training=*/true);
    const std::vector<dxnat::nn::Tensor> analytic = net.backward(target);
    GradCheckResult result;
    for (std::size_t p = 0; p < net.parameters().size(); ++p) {
        for (std::size_t j = 0; j < net.parameters()[p].data.size(); ++j) {
            double& value = net.parameters()[p].data[j];
            const double saved = value;
            value = saved + h;
            const double up = cross_entropy(net.predict(image, features), target);
            value = saved - h;
            const double down = cross_entropy(net.predict(image, features), target);
            value = saved;
            const double fd = (up - down) / (2.0 * h);
            const double an = analytic[p].data[j];
            ++result.checked;
            if (std::abs(fd) < 1e-8 && std::abs(an) < 1e-8) continue;
            const double rel = std::abs(fd - an) / std::max(std::abs(fd), std::abs(an));
            result.max_rel_err = std::max(result.max_rel_err, rel);
        }
    }
    net.set_dropout_enabled(true);
    return result;
}

} // namespace testutil
