#ifndef AIMC_CHECKPOINT_HPP
#define AIMC_CHECKPOINT_HPP

#include <aimc/hwa.hpp>
#include <aimc/mapping.hpp>
#include <aimc/tensor_io.hpp>
#include <aimc/tile.hpp>

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace aimc {

// A checkpoint is a directory:
//   manifest.txt          task, split and one "layer" line per layer with
//                         alpha, kappa~ and c_aws
//   layer<k>_weights.bin  normalized weights (out x in)
//   layer<k>_gamma.bin    combined digital scale per output (out x 1)
//   layer<k>_beta.bin     digital bias (out x 1)

struct CheckpointLayer {
    Matrix weights;
    Vector gamma;
    Vector beta;
    double alpha = 1.0;
    double kappa_tilde = 1.0;
    double c_aws = 1.0;
};

struct Checkpoint {
    std::string task = "digits";
    int hidden = 0;
    double test_fraction = 0.25;
    std::uint64_t split_seed = 0;
    std::vector<CheckpointLayer> layers;
};

inline Checkpoint checkpoint_from(const HwaNetwork& net)
{
    Checkpoint c;
    for (const auto& l : net.layers)
        c.layers.push_back({l.w.cwiseMax(-1.0).cwiseMin(1.0), l.gamma(), l.beta, l.alpha, l.kappa_tilde, l.c_aws});
    return c;
}

inline Checkpoint checkpoint_from(const InferenceNetwork& net)
{
    Checkpoint c;
    for (const auto& l : net.layers)
        c.layers.push_back({l.mapped().normalized, l.gamma(), l.beta(), l.alpha(), 1.0,
                            std::sqrt(3.0 / static_cast<double>(l.mapped().in_size))});
    return c;
}

inline InferenceNetwork inference_from(const Checkpoint& c, const TileConfig& tile)
{
    InferenceNetwork inf;
    for (const auto& l : c.layers)
        inf.layers.emplace_back(mapped_from_normalized(l.weights, l.gamma, tile.max_rows, tile.max_cols), tile, l.alpha,
                                l.beta);
    return inf;
}

inline void save_checkpoint(const std::string& dir, const Checkpoint& c)
{
    namespace fs = std::filesystem;
    fs::create_directories(dir);
    std::ofstream m(fs::path(dir) / "manifest.txt");
    if (!m)
        throw std::runtime_error("cannot write checkpoint manifest in " + dir);
    char buf[64];
    auto num = [&buf](double v) {
        std::snprintf(buf, sizeof buf, "%.17g", v);
        return std::string(buf);
    };
    m << "# aimc checkpoint\n";
    m << "task " << c.task << "\n";
    m << "hidden " << c.hidden << "\n";
    m << "test_fraction " << num(c.test_fraction) << "\n";
    m << "split_seed " << c.split_seed << "\n";
    m << "layers " << c.layers.size() << "\n";
    for (std::size_t k = 0; k < c.layers.size(); ++k) {
        const auto& l = c.layers[k];
        m << "layer " << k << " in " << l.weights.cols() << " out " << l.weights.rows() << " alpha " << num(l.alpha)
          << " kappa_tilde " << num(l.kappa_tilde) << " c_aws " << num(l.c_aws) << "\n";
        const std::string stem = (fs::path(dir) / ("layer" + std::to_string(k))).string();
        save_tensor(stem + "_weights.bin", l.weights);
        save_tensor(stem + "_gamma.bin", Matrix(l.gamma));
        save_tensor(stem + "_beta.bin", Matrix(l.beta));
    }
}

inline Checkpoint load_checkpoint(const std::string& dir)
{
    namespace fs = std::filesystem;
    std::ifstream m(fs::path(dir) / "manifest.txt");
    if (!m)
        throw std::runtime_error("no checkpoint manifest in " + dir);
    Checkpoint c;
    std::string line;
    std::size_t n_layers = 0;
    while (std::getline(m, line)) {
        if (line.empty() || line[0] == '#')
            continue;
        std::istringstream ss(line);
        std::string key;
        ss >> key;
        if (key == "task") {
            ss >> c.task;
        } else if (key == "hidden") {
            ss >> c.hidden;
        } else if (key == "test_fraction") {
            ss >> c.test_fraction;
        } else if (key == "split_seed") {
            ss >> c.split_seed;
        } else if (key == "layers") {
            ss >> n_layers;
            c.layers.resize(n_layers);
        } else if (key == "layer") {
            std::size_t k = 0;
            long long in = 0, out = 0;
            std::string w1, w2, w3, w4, w5;
            CheckpointLayer l;
            ss >> k >> w1 >> in >> w2 >> out >> w3 >> l.alpha >> w4 >> l.kappa_tilde >> w5 >> l.c_aws;
            if (!ss || k >= c.layers.size())
                throw std::runtime_error("checkpoint: malformed layer line");
            const std::string stem = (fs::path(dir) / ("layer" + std::to_string(k))).string();
            l.weights = load_tensor(stem + "_weights.bin");
            l.gamma = load_tensor(stem + "_gamma.bin").col(0);
            l.beta = load_tensor(stem + "_beta.bin").col(0);
            if (l.weights.cols() != in || l.weights.rows() != out || l.gamma.size() != out || l.beta.size() != out)
                throw std::runtime_error("checkpoint: tensor shapes do not match the manifest");
            c.layers[k] = std::move(l);
        } else {
            throw std::runtime_error("checkpoint: unknown manifest entry '" + key + "'");
        }
    }
    if (c.layers.empty())
        throw std::runtime_error("checkpoint: no layers");
    return c;
}

} // namespace aimc

#endif // AIMC_CHECKPOINT_HPP
