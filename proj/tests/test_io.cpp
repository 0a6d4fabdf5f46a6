#include <aimc/checkpoint.hpp>
#include <aimc/config.hpp>
#include <aimc/csv.hpp>
#include <aimc/datasets.hpp>
#include <aimc/tensor_io.hpp>

#include <gtest/gtest.h>

#include <filesystem>
#include <sstream>

using namespace aimc;

namespace {

std::filesystem::path scratch(const std::string& name)
{
    const auto p = std::filesystem::temp_directory_path() / ("aimc_test_" + name);
    std::filesystem::remove_all(p);
    return p;
}

} // namespace

TEST(Config, DefaultsMatchStandardModel)
{
    const RunConfig c;
    EXPECT_EQ(c.protocol.tile.out_noise, 0.04);
    EXPECT_EQ(c.protocol.tile.w_noise, 0.0175);
    EXPECT_EQ(c.protocol.tile.out_bound, 10.0);
    EXPECT_EQ(c.protocol.tile.dac_bits, 8);
    EXPECT_EQ(c.protocol.pcm.g_max, 25.0);
    EXPECT_EQ(c.protocol.rows, 512);
    EXPECT_NO_THROW(validate_config(c));
}

TEST(Config, UnknownKeyNamesTheKey)
{
    RunConfig c;
    std::istringstream in("[forward]\nout_noise = 0.05\nbogus_key = 3\n");
    try {
        load_config(in, c);
        FAIL() << "expected ConfigError";
    } catch (const ConfigError& e) {
        EXPECT_EQ(e.key(), "forward.bogus_key");
    }
    std::istringstream in2("[nosuchsection]\nx = 1\n");
    EXPECT_THROW(load_config(in2, c), ConfigError);
    EXPECT_THROW(set_config_value(c, "forward.out_noise", "abc"), ConfigError);
    EXPECT_THROW(set_config_value(c, "forward.inp_res", "7.5"), ConfigError);
}

TEST(Config, ParsesSectionsAndComments)
{
    RunConfig c;
    std::istringstream in("# comment\n[forward]\nout_noise = 0.08 ; trailing\n[noise_model]\ndrift_scale=0\n"
                          "[hwa]\neval_times = 1, 3600\n[run]\nseed = 99\n");
    load_config(in, c);
    EXPECT_EQ(c.protocol.tile.out_noise, 0.08);
    EXPECT_EQ(c.protocol.pcm.drift_scale, 0.0);
    EXPECT_EQ(c.hwa.eval_times, (std::vector<double>{1.0, 3600.0}));
    EXPECT_EQ(c.seed, 99u);
}

TEST(Config, InvalidValueIsConfigError)
{
    RunConfig c;
    set_config_value(c, "forward.out_noise", "-1");
    EXPECT_THROW(validate_config(c), ConfigError);
    RunConfig d;
    set_config_value(d, "hwa.dynamic_management", "true");
    EXPECT_THROW(validate_config(d), ConfigError);
}

TEST(Config, DumpRoundTripsAndHashes)
{
    RunConfig c;
    set_config_value(c, "forward.ir_drop", "3.5");
    set_config_value(c, "hwa.task", "spirals");
    set_config_value(c, "hwa.eval_times", "1,86400");
    set_config_value(c, "protocol.scale_mode", "per_column");
    RunConfig d;
    std::istringstream in(dump_config(c));
    load_config(in, d);
    EXPECT_EQ(dump_config(c), dump_config(d));
    EXPECT_EQ(config_hash(c), config_hash(d));
    EXPECT_EQ(config_hash(c).size(), 16u);
    d.threads = 8;
    EXPECT_EQ(config_hash(c), config_hash(d));
    d.seed = 1;
    EXPECT_NE(config_hash(c), config_hash(d));
    for (const auto& k : config_keys())
        EXPECT_NE(dump_config(c).find(k.substr(k.find('.') + 1) + " = "), std::string::npos) << k;
}

TEST(Csv, Rfc4180Quoting)
{
    EXPECT_EQ(csv_escape("plain"), "plain");
    EXPECT_EQ(csv_escape("a,b"), "\"a,b\"");
    EXPECT_EQ(csv_escape("say \"hi\""), "\"say \"\"hi\"\"\"");
    EXPECT_EQ(csv_escape("two\nlines"), "\"two\nlines\"");
}

TEST(Csv, NumbersRoundTrip)
{
    for (const double v : {0.1, 1.0 / 3.0, 1e-300, 123456789.0, -2.5})
        EXPECT_EQ(std::strtod(csv_number(v).c_str(), nullptr), v);
    EXPECT_EQ(csv_number(0.5), "0.5");
    EXPECT_EQ(csv_number(std::nan("")), "nan");
}

TEST(Csv, WriterLayout)
{
    std::ostringstream os;
    CsvWriter w(os, {{"aimc", "test"}, {"config_hash", "abc"}}, {"name", "value"});
    w.row({std::string("x,y"), 0.25});
    w.row({std::string("z"), 3LL});
    EXPECT_EQ(os.str(), "# aimc=test config_hash=abc\nname,value\n\"x,y\",0.25\nz,3\n");
    EXPECT_THROW(w.row({1.0}), std::invalid_argument);
}

TEST(TensorIo, BinaryAndCsvRoundTrip)
{
    const Matrix m = Matrix::Random(7, 3);
    const auto dir = scratch("tensor");
    std::filesystem::create_directories(dir);
    save_tensor((dir / "m.bin").string(), m);
    save_tensor((dir / "m.csv").string(), m);
    EXPECT_EQ(load_tensor((dir / "m.bin").string()), m);
    EXPECT_EQ(load_tensor((dir / "m.csv").string()), m);
    std::istringstream bad("NOTATENSOR");
    EXPECT_THROW(read_tensor_binary(bad), std::runtime_error);
    std::filesystem::remove_all(dir);
}

TEST(Checkpoint, RoundTrip)
{
    Checkpoint c;
    c.task = "spirals";
    c.hidden = 8;
    c.split_seed = 12345678901234ULL;
    c.layers.push_back({Matrix::Random(8, 2).cwiseMax(-1.0).cwiseMin(1.0), Vector::Constant(8, 0.7),
                        Vector::Random(8), 1.25, 9.5, 0.5});
    c.layers.push_back({Matrix::Random(3, 8).cwiseMax(-1.0).cwiseMin(1.0), Vector::Constant(3, 0.2),
                        Vector::Random(3), 2.0, 1.0, 0.25});
    const auto dir = scratch("ckpt");
    save_checkpoint(dir.string(), c);
    const Checkpoint d = load_checkpoint(dir.string());
    EXPECT_EQ(d.task, c.task);
    EXPECT_EQ(d.hidden, 8);
    EXPECT_EQ(d.split_seed, c.split_seed);
    ASSERT_EQ(d.layers.size(), 2u);
    for (std::size_t k = 0; k < 2; ++k) {
        EXPECT_EQ(d.layers[k].weights, c.layers[k].weights);
        EXPECT_EQ(d.layers[k].gamma, c.layers[k].gamma);
        EXPECT_EQ(d.layers[k].beta, c.layers[k].beta);
        EXPECT_EQ(d.layers[k].alpha, c.layers[k].alpha);
        EXPECT_EQ(d.layers[k].kappa_tilde, c.layers[k].kappa_tilde);
    }
    const InferenceNetwork net = inference_from(d, TileConfig{});
    EXPECT_EQ(net.layers.size(), 2u);
    std::filesystem::remove_all(dir);
    EXPECT_THROW(load_checkpoint(dir.string()), std::runtime_error);
}

TEST(Datasets, DigitsBundle)
{
    const Dataset d = load_digits();
    EXPECT_EQ(d.size(), 1797);
    EXPECT_EQ(d.dim(), 64);
    EXPECT_EQ(d.num_classes, 10);
    EXPECT_LE(d.features.maxCoeff(), 1.0);
    EXPECT_GE(d.features.minCoeff(), 0.0);
    auto [train, test] = train_test_split(d, 0.25, 3);
    EXPECT_EQ(train.size() + test.size(), d.size());
    EXPECT_NEAR(static_cast<double>(test.size()) / d.size(), 0.25, 0.01);
}

TEST(Datasets, SpiralsAreReproducible)
{
    const Dataset a = make_spirals(50, 3, 0.05, 7);
    const Dataset b = make_spirals(50, 3, 0.05, 7);
    EXPECT_EQ(a.features, b.features);
    EXPECT_EQ(a.size(), 150);
    EXPECT_EQ(a.num_classes, 3);
}
