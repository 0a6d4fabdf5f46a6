#ifndef AIMC_TENSOR_IO_HPP
#define AIMC_TENSOR_IO_HPP

#include <Eigen/Dense>

#include <array>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace aimc {

// Binary layout (little-endian):
//   8 bytes  magic "AIMCTNS1"
//   uint64   rows
//   uint64   cols
//   rows*cols float64, row-major
// CSV layout: first line "# shape <rows> <cols>", then one matrix row per line.

namespace detail {

inline constexpr std::array<char, 8> tensor_magic{'A', 'I', 'M', 'C', 'T', 'N', 'S', '1'};

inline void put_u64(std::ostream& os, std::uint64_t v)
{
    unsigned char b[8];
    for (int k = 0; k < 8; ++k)
        b[k] = static_cast<unsigned char>(v >> (8 * k));
    os.write(reinterpret_cast<const char*>(b), 8);
}

inline std::uint64_t get_u64(std::istream& is)
{
    unsigned char b[8];
    if (!is.read(reinterpret_cast<char*>(b), 8))
        throw std::runtime_error("tensor: truncated header");
    std::uint64_t v = 0;
    for (int k = 7; k >= 0; --k)
        v = (v << 8) | b[k];
    return v;
}

} // namespace detail

inline void write_tensor_binary(std::ostream& os, const Eigen::MatrixXd& m)
{
    os.write(detail::tensor_magic.data(), 8);
    detail::put_u64(os, static_cast<std::uint64_t>(m.rows()));
    detail::put_u64(os, static_cast<std::uint64_t>(m.cols()));
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        for (Eigen::Index j = 0; j < m.cols(); ++j) {
            std::uint64_t bits = 0;
            const double v = m(i, j);
            std::memcpy(&bits, &v, 8);
            detail::put_u64(os, bits);
        }
    }
    if (!os)
        throw std::runtime_error("tensor: write failed");
}

inline Eigen::MatrixXd read_tensor_binary(std::istream& is)
{
    std::array<char, 8> magic{};
    if (!is.read(magic.data(), 8) || magic != detail::tensor_magic)
        throw std::runtime_error("tensor: bad magic");
    const std::uint64_t rows = detail::get_u64(is);
    const std::uint64_t cols = detail::get_u64(is);
    if (rows > (1ULL << 31) || cols > (1ULL << 31))
        throw std::runtime_error("tensor: implausible shape");
    Eigen::MatrixXd m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        for (Eigen::Index j = 0; j < m.cols(); ++j) {
            const std::uint64_t bits = detail::get_u64(is);
            double v = 0.0;
            std::memcpy(&v, &bits, 8);
            m(i, j) = v;
        }
    }
    return m;
}

inline void write_tensor_csv(std::ostream& os, const Eigen::MatrixXd& m)
{
    os << "# shape " << m.rows() << ' ' << m.cols() << '\n';
    os << std::setprecision(17);
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        for (Eigen::Index j = 0; j < m.cols(); ++j)
            os << (j ? "," : "") << m(i, j);
        os << '\n';
    }
}

inline Eigen::MatrixXd read_tensor_csv(std::istream& is)
{
    std::string line;
    if (!std::getline(is, line))
        throw std::runtime_error("tensor csv: empty input");
    std::istringstream header(line);
    std::string hash, word;
    long long rows = -1, cols = -1;
    header >> hash >> word >> rows >> cols;
    if (hash != "#" || word != "shape" || rows < 0 || cols < 0)
        throw std::runtime_error("tensor csv: missing '# shape <rows> <cols>' header");
    Eigen::MatrixXd m(rows, cols);
    for (long long i = 0; i < rows; ++i) {
        if (!std::getline(is, line))
            throw std::runtime_error("tensor csv: fewer rows than the header states");
        std::istringstream row(line);
        std::string cell;
        long long j = 0;
        while (std::getline(row, cell, ',')) {
            if (j >= cols)
                throw std::runtime_error("tensor csv: too many columns in row " + std::to_string(i));
            m(i, j++) = std::stod(cell);
        }
        if (j != cols)
            throw std::runtime_error("tensor csv: too few columns in row " + std::to_string(i));
    }
    return m;
}

inline void save_tensor(const std::string& path, const Eigen::MatrixXd& m)
{
    const bool csv = path.size() >= 4 && path.compare(path.size() - 4, 4, ".csv") == 0;
    std::ofstream os(path, csv ? std::ios::out : std::ios::out | std::ios::binary);
    if (!os)
        throw std::runtime_error("cannot open " + path);
    csv ? write_tensor_csv(os, m) : write_tensor_binary(os, m);
}

inline Eigen::MatrixXd load_tensor(const std::string& path)
{
    const bool csv = path.size() >= 4 && path.compare(path.size() - 4, 4, ".csv") == 0;
    std::ifstream is(path, csv ? std::ios::in : std::ios::in | std::ios::binary);
    if (!is)
        throw std::runtime_error("cannot open " + path);
    return csv ? read_tensor_csv(is) : read_tensor_binary(is);
}

} // namespace aimc

#endif // AIMC_TENSOR_IO_HPP
