#ifndef AIMC_DATASETS_HPP
#define AIMC_DATASETS_HPP

#include <aimc/random.hpp>

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <numbers>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#ifndef AIMC_DATA_DIR
#define AIMC_DATA_DIR "data"
#endif

namespace aimc {

/// Labelled samples stored column-wise: features is d x N.
struct Dataset {
    Eigen::MatrixXd features;
    std::vector<int> labels;
    int num_classes = 0;

    Eigen::Index size() const noexcept { return features.cols(); }
    Eigen::Index dim() const noexcept { return features.rows(); }

    Dataset subset(const std::vector<Eigen::Index>& idx) const
    {
        Dataset d;
        d.num_classes = num_classes;
        d.features.resize(features.rows(), static_cast<Eigen::Index>(idx.size()));
        d.labels.resize(idx.size());
        for (std::size_t k = 0; k < idx.size(); ++k) {
            d.features.col(static_cast<Eigen::Index>(k)) = features.col(idx[k]);
            d.labels[k] = labels[static_cast<std::size_t>(idx[k])];
        }
        return d;
    }
};

/// Reads "f1,...,fd,label" rows. A first line that does not parse as
/// numbers is treated as a header. Features are multiplied by `scale`.
inline Dataset load_dataset_csv(const std::string& path, double scale = 1.0)
{
    std::ifstream in(path);
    if (!in)
        throw std::runtime_error("cannot open dataset " + path);
    std::vector<std::vector<double>> rows;
    std::vector<int> labels;
    std::string line;
    bool first = true;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#')
            continue;
        std::vector<double> values;
        std::stringstream ss(line);
        std::string cell;
        bool numeric = true;
        while (std::getline(ss, cell, ',')) {
            try {
                std::size_t used = 0;
                values.push_back(std::stod(cell, &used));
                if (used != cell.size() && cell.find_first_not_of(" \r\t", used) != std::string::npos)
                    numeric = false;
            } catch (const std::exception&) {
                numeric = false;
                break;
            }
        }
        if (!numeric) {
            if (first) {
                first = false;
                continue;
            }
            throw std::runtime_error("dataset " + path + ": non-numeric row");
        }
        first = false;
        if (values.size() < 2)
            throw std::runtime_error("dataset " + path + ": need features and a label");
        if (!rows.empty() && values.size() != rows.front().size() + 1)
            throw std::runtime_error("dataset " + path + ": ragged rows");
        labels.push_back(static_cast<int>(std::lround(values.back())));
        values.pop_back();
        rows.push_back(std::move(values));
    }
    if (rows.empty())
        throw std::runtime_error("dataset " + path + " is empty");
    Dataset d;
    d.features.resize(static_cast<Eigen::Index>(rows.front().size()), static_cast<Eigen::Index>(rows.size()));
    for (std::size_t n = 0; n < rows.size(); ++n)
        for (std::size_t k = 0; k < rows[n].size(); ++k)
            d.features(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(n)) = rows[n][k] * scale;
    d.labels = std::move(labels);
    if (*std::min_element(d.labels.begin(), d.labels.end()) < 0)
        throw std::runtime_error("dataset " + path + ": negative label");
    d.num_classes = *std::max_element(d.labels.begin(), d.labels.end()) + 1;
    return d;
}

/// The bundled 8x8 handwritten digits (1797 samples, pixels scaled to [0, 1]).
inline Dataset load_digits(const std::string& data_dir = AIMC_DATA_DIR)
{
    return load_dataset_csv(data_dir + "/digits.csv", 1.0 / 16.0);
}

/// Interleaved spirals in 2-D, `arms` classes with n_per_class points each.
inline Dataset make_spirals(int n_per_class, int arms, double noise, std::uint64_t seed)
{
    if (n_per_class < 1 || arms < 2)
        throw std::invalid_argument("make_spirals: need n_per_class >= 1 and arms >= 2");
    RandomStream rng(seed, "spirals");
    Dataset d;
    d.num_classes = arms;
    d.features.resize(2, static_cast<Eigen::Index>(n_per_class) * arms);
    d.labels.resize(static_cast<std::size_t>(n_per_class) * static_cast<std::size_t>(arms));
    Eigen::Index k = 0;
    for (int c = 0; c < arms; ++c) {
        for (int i = 0; i < n_per_class; ++i, ++k) {
            const double r = static_cast<double>(i + 1) / n_per_class;
            const double theta = 2.0 * std::numbers::pi * (static_cast<double>(c) / arms + 0.75 * r) + noise * rng.normal();
            d.features(0, k) = r * std::cos(theta);
            d.features(1, k) = r * std::sin(theta);
            d.labels[static_cast<std::size_t>(k)] = c;
        }
    }
    return d;
}

/// Shuffled split; the first round(test_fraction * N) shuffled samples
/// form the test set.
inline std::pair<Dataset, Dataset> train_test_split(const Dataset& d, double test_fraction, std::uint64_t seed)
{
    if (!(test_fraction > 0.0 && test_fraction < 1.0))
        throw std::invalid_argument("train_test_split: test_fraction must be in (0, 1)");
    std::vector<Eigen::Index> idx(static_cast<std::size_t>(d.size()));
    std::iota(idx.begin(), idx.end(), Eigen::Index{0});
    RandomStream rng(seed, "split");
    for (std::size_t i = idx.size() - 1; i > 0; --i)
        std::swap(idx[i], idx[rng.index(i + 1)]);
    const auto n_test = static_cast<std::size_t>(std::lround(test_fraction * static_cast<double>(idx.size())));
    std::vector<Eigen::Index> test(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(n_test));
    std::vector<Eigen::Index> train(idx.begin() + static_cast<std::ptrdiff_t>(n_test), idx.end());
    return {d.subset(train), d.subset(test)};
}

} // namespace aimc

#endif // AIMC_DATASETS_HPP
