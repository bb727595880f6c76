#include <catch2/catch_amalgamated.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>

#include "terratwin/config.hpp"
#include "terratwin/netpbm.hpp"
#include "terratwin/rng.hpp"

using namespace terratwin;
namespace fs = std::filesystem;

namespace {
fs::path temp_dir(const char* tag) {
    fs::path dir = fs::temp_directory_path() / (std::string("terratwin_test_") + tag);
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

std::vector<std::uint8_t> file_bytes(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    REQUIRE(in.good());
    return std::vector<std::uint8_t>((std::istreambuf_iterator<char>(in)),
                                     std::istreambuf_iterator<char>());
}
} // namespace

TEST_CASE("netpbm P6 write/read round trip is byte identical") {
    const fs::path dir = temp_dir("pnm_p6");
    Pcg32 rng(99);
    TerrainImage img(64, 64);
    for (std::size_t i = 0; i < img.size(); ++i)
        img[i] = Rgb{static_cast<std::uint8_t>(rng.next_below(256)),
                     static_cast<std::uint8_t>(rng.next_below(256)),
                     static_cast<std::uint8_t>(rng.next_below(256))};
    const io::ImageFile out = io::to_pnm(img);
    io::write_netpbm(dir / "a.ppm", out);
    const io::ImageFile back = io::read_netpbm(dir / "a.ppm");
    CHECK(back.width == 64);
    CHECK(back.payload == out.payload);
    CHECK(io::rgb_from_pnm(back) == img);
    // write(read(x)) reproduces the original bytes
    io::write_netpbm(dir / "b.ppm", back);
    CHECK(file_bytes(dir / "a.ppm") == file_bytes(dir / "b.ppm"));
    CHECK_FALSE(fs::exists(dir / "a.ppm.tmp"));
}

TEST_CASE("netpbm accepts a minimal single-space header") {
    std::vector<std::uint8_t> bytes = {'P', '6', ' ', '2', ' ', '2', ' ', '2', '5', '5', '\n'};
    for (int i = 0; i < 12; ++i)
        bytes.push_back(static_cast<std::uint8_t>(i));
    const io::ImageFile img = io::parse_netpbm(bytes);
    CHECK(img.width == 2);
    CHECK(img.height == 2);
    CHECK(img.format == io::PnmFormat::P6);
    CHECK(img.payload.size() == 12);
}

TEST_CASE("netpbm header comments are skipped") {
    std::string header = "P5\n# a comment\n3 2\n# another\n255\n";
    std::vector<std::uint8_t> bytes(header.begin(), header.end());
    for (int i = 0; i < 6; ++i)
        bytes.push_back(7);
    const io::ImageFile img = io::parse_netpbm(bytes);
    CHECK(img.width == 3);
    CHECK(img.format == io::PnmFormat::P5_8);
}

TEST_CASE("netpbm parse errors are specific") {
    SECTION("bad magic") {
        std::vector<std::uint8_t> bytes = {'P', '3', ' ', '1', ' ', '1', ' ', '2', '5', '5',
                                           '\n', 0, 0, 0};
        CHECK_THROWS_AS(io::parse_netpbm(bytes), parse_error);
    }
    SECTION("unsupported maxval") {
        std::string h = "P5\n2 2\n127\n";
        std::vector<std::uint8_t> bytes(h.begin(), h.end());
        bytes.resize(bytes.size() + 4, 0);
        CHECK_THROWS_AS(io::parse_netpbm(bytes), parse_error);
    }
    SECTION("truncated payload names expected vs actual") {
        std::string h = "P6\n2 2\n255\n";
        std::vector<std::uint8_t> bytes(h.begin(), h.end());
        bytes.resize(bytes.size() + 11, 0); // one byte short of 12
        try {
            io::parse_netpbm(bytes);
            FAIL("expected parse_error");
        } catch (const parse_error& e) {
            const std::string msg = e.what();
            CHECK(msg.find("12") != std::string::npos);
            CHECK(msg.find("11") != std::string::npos);
        }
    }
}

TEST_CASE("netpbm 16-bit samples are most significant byte first") {
    Grid<std::uint16_t> g(2, 1);
    g.at(0, 0) = 0x1234;
    g.at(1, 0) = 0xff00;
    const io::ImageFile img = io::to_pnm(g);
    REQUIRE(img.payload.size() == 4);
    CHECK(img.payload[0] == 0x12);
    CHECK(img.payload[1] == 0x34);
    CHECK(img.payload[2] == 0xff);
    CHECK(img.payload[3] == 0x00);
    CHECK(io::gray16_from_pnm(img) == g);
}

TEST_CASE("config precedence: defaults < file < flags") {
    const fs::path dir = temp_dir("config");
    {
        std::ofstream f(dir / "cfg.txt");
        f << "# comment line\n";
        f << "sampler.base = 32\n";
        f << "train.learning_rate = 0.01  # trailing comment\n";
    }
    io::AppConfig cfg = io::AppConfig::defaults();
    CHECK(cfg.get_int("sampler.base") == 64);
    cfg.apply_file(dir / "cfg.txt");
    CHECK(cfg.get_int("sampler.base") == 32);
    CHECK(cfg.get_double("train.learning_rate") == 0.01);
    cfg.set("sampler.base", "48");
    CHECK(cfg.get_int("sampler.base") == 48);

    // resolving twice is idempotent
    cfg.apply_file(dir / "cfg.txt");
    cfg.apply_file(dir / "cfg.txt");
    CHECK(cfg.get_double("train.learning_rate") == 0.01);
}

TEST_CASE("config rejects unknown keys with the line number") {
    const fs::path dir = temp_dir("config_bad");
    {
        std::ofstream f(dir / "cfg.txt");
        f << "sampler.base = 32\n";
        f << "sampler.bogus = 1\n";
    }
    io::AppConfig cfg = io::AppConfig::defaults();
    try {
        cfg.apply_file(dir / "cfg.txt");
        FAIL("expected parse_error");
    } catch (const parse_error& e) {
        CHECK(std::string(e.what()).find("sampler.bogus") != std::string::npos);
        CHECK(e.offset() == 2);
    }
    CHECK_THROWS_AS(cfg.set("no.such.key", "1"), argument_error);
}

TEST_CASE("config typed getters validate values") {
    io::AppConfig cfg = io::AppConfig::defaults();
    cfg.set("sampler.base", "not_a_number");
    CHECK_THROWS_AS(cfg.sampler_config(), argument_error);
    cfg.set("sampler.base", "63"); // odd
    CHECK_THROWS_AS(cfg.sampler_config(), argument_error);
    cfg.set("train.optimizer", "rmsprop");
    CHECK_THROWS_AS(cfg.train_config(), argument_error);
}
