// Hashing, quantile, RNG, and string helper tests. The SHA-256 and
// FNV-1a expectations are the published reference vectors; the quantile
// checks compare against an independently written interpolation oracle.
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "ptod/util/quantile.hpp"
#include "ptod/util/rng.hpp"
#include "ptod/util/sha256.hpp"
#include "ptod/util/strings.hpp"

namespace {

std::string hex_of(const std::array<uint8_t, 32>& d) {
    static const char* hex = "0123456789abcdef";
    std::string out;
    for (uint8_t b : d) {
        out.push_back(hex[b >> 4]);
        out.push_back(hex[b & 0xf]);
    }
    return out;
}

// Same type-7 definition, written independently of the library code.
double quantile_oracle(std::vector<double> v, double p) {
    std::sort(v.begin(), v.end());
    if (v.size() == 1) return v[0];
    double h = p * static_cast<double>(v.size() - 1);
    double lo = std::floor(h);
    auto i = static_cast<size_t>(lo);
    if (i + 1 >= v.size()) return v.back();
    return std::lerp(v[i], v[i + 1], h - lo);
}

}  // namespace

TEST_CASE("sha256 matches the NIST byte vectors") {
    CHECK(ptod::sha256_hex("") ==
          "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
    CHECK(ptod::sha256_hex("abc") ==
          "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
    CHECK(ptod::sha256_hex("abcdbcdecdefdefgefghfghighijhijkijkljklmklmnlmnomnopnopq") ==
          "248d6a61d20638b8e5c026930c3e6039a33ce45964ff2167f6ecedd419db06c1");
}

TEST_CASE("sha256 million-a vector via chunked updates") {
    ptod::Sha256 h;
    std::string chunk(997, 'a');
    size_t written = 0;
    while (written < 1000000) {
        size_t take = std::min(chunk.size(), size_t{1000000} - written);
        h.update(chunk.data(), take);
        written += take;
    }
    CHECK(hex_of(h.digest()) ==
          "cdc76e5c9914fb9281a1c7e284d73e67f1809a48a497200e046d39ccc7112cd0");
}

TEST_CASE("sha256 chunked updates equal one-shot hashing") {
    std::mt19937_64 rng(20240601);
    for (int trial = 0; trial < 60; ++trial) {
        size_t len = ptod::uniform_index(rng, 300);
        std::string data;
        for (size_t i = 0; i < len; ++i)
            data.push_back(static_cast<char>(ptod::uniform_index(rng, 256)));

        ptod::Sha256 chunked;
        size_t pos = 0;
        while (pos < data.size()) {
            size_t take = 1 + ptod::uniform_index(rng, 64);
            take = std::min(take, data.size() - pos);
            chunked.update(data.data() + pos, take);
            pos += take;
        }
        CHECK(hex_of(chunked.digest()) == ptod::sha256_hex(data));
    }
}

TEST_CASE("sha256 object is reusable after reset") {
    ptod::Sha256 h;
    h.update(std::string_view{"abc"});
    auto first = h.digest();
    h.reset();
    h.update(std::string_view{"abc"});
    CHECK(h.digest() == first);
}

TEST_CASE("fnv1a64 matches the reference vectors") {
    CHECK(ptod::fnv1a64("") == 0xcbf29ce484222325ULL);
    CHECK(ptod::fnv1a64("a") == 0xaf63dc4c8601ec8cULL);
    CHECK(ptod::fnv1a64("foobar") == 0x85944171f73967e8ULL);
}

TEST_CASE("quantile_type7 on the worked example") {
    std::vector<double> v{1, 10, 11, 12, 13, 14};
    ptod::Quartiles q = ptod::quartiles(v);
    CHECK(q.q1 == doctest::Approx(10.25));
    CHECK(q.q3 == doctest::Approx(12.75));
    CHECK(q.iqr() == doctest::Approx(2.5));
    CHECK(ptod::quantile_type7(v, 0.0) == 1.0);
    CHECK(ptod::quantile_type7(v, 1.0) == 14.0);
    CHECK(ptod::quantile_type7(v, 0.5) == doctest::Approx(11.5));
}

TEST_CASE("quantile_type7 degenerate samples") {
    std::vector<double> one{42.0};
    CHECK(ptod::quantile_type7(one, 0.0) == 42.0);
    CHECK(ptod::quantile_type7(one, 0.37) == 42.0);
    CHECK(ptod::quantile_type7(one, 1.0) == 42.0);

    std::vector<double> two{2.0, 4.0};
    CHECK(ptod::quantile_type7(two, 0.5) == doctest::Approx(3.0));
    CHECK(ptod::quantile_type7(two, 0.25) == doctest::Approx(2.5));

    std::vector<double> empty;
    CHECK_THROWS_AS(ptod::quantile_type7(empty, 0.5), std::invalid_argument);
}

TEST_CASE("quantile_type7 agrees with the oracle on tie-heavy samples") {
    std::mt19937_64 rng(311);
    for (int trial = 0; trial < 200; ++trial) {
        size_t n = 1 + ptod::uniform_index(rng, 40);
        std::vector<double> v(n);
        // Small integer support forces plenty of ties.
        for (auto& x : v) x = static_cast<double>(ptod::uniform_index(rng, 5));

        double prev = -1e300;
        for (int step = 0; step <= 20; ++step) {
            double p = static_cast<double>(step) / 20.0;
            double got = ptod::quantile_type7(v, p);
            CHECK(got == doctest::Approx(quantile_oracle(v, p)).epsilon(1e-12));
            CHECK(got >= *std::min_element(v.begin(), v.end()));
            CHECK(got <= *std::max_element(v.begin(), v.end()));
            CHECK(got >= prev - 1e-12);  // monotone in p
            prev = got;
        }
    }
}

TEST_CASE("quantile_type7 recovers order statistics at grid points") {
    std::vector<double> v{3.0, 1.0, 4.0, 1.5, 9.0};  // sorted: 1, 1.5, 3, 4, 9
    std::vector<double> sorted{1.0, 1.5, 3.0, 4.0, 9.0};
    for (size_t i = 0; i < sorted.size(); ++i) {
        double p = static_cast<double>(i) / static_cast<double>(sorted.size() - 1);
        CHECK(ptod::quantile_type7(v, p) == doctest::Approx(sorted[i]));
    }
}

TEST_CASE("uniform_index is deterministic and in range") {
    std::mt19937_64 a(7), b(7);
    for (int i = 0; i < 1000; ++i) {
        size_t n = 1 + static_cast<size_t>(i % 17);
        size_t x = ptod::uniform_index(a, n);
        CHECK(x == ptod::uniform_index(b, n));
        CHECK(x < n);
    }
    CHECK(ptod::uniform_index(a, 0) == 0);
    CHECK(ptod::uniform_index(a, 1) == 0);
}

TEST_CASE("uniform_index covers all buckets roughly evenly") {
    std::mt19937_64 rng(42);
    std::array<int, 3> counts{};
    for (int i = 0; i < 3000; ++i) ++counts[ptod::uniform_index(rng, 3)];
    for (int c : counts) {
        CHECK(c > 800);
        CHECK(c < 1200);
    }
}

TEST_CASE("uniform01 stays in the half-open unit interval") {
    std::mt19937_64 a(99), b(99);
    for (int i = 0; i < 10000; ++i) {
        double x = ptod::uniform01(a);
        CHECK(x == ptod::uniform01(b));
        CHECK(x >= 0.0);
        CHECK(x < 1.0);
    }
}

TEST_CASE("gaussian draws have standard-normal moments") {
    std::mt19937_64 rng(1234);
    const int n = 20000;
    double sum = 0.0, sumsq = 0.0;
    for (int i = 0; i < n; ++i) {
        double x = ptod::gaussian(rng);
        sum += x;
        sumsq += x * x;
    }
    double mean = sum / n;
    double var = sumsq / n - mean * mean;
    CHECK(std::abs(mean) < 0.03);
    CHECK(var > 0.95);
    CHECK(var < 1.05);

    std::mt19937_64 again(1234), twin(1234);
    CHECK(ptod::gaussian(again) == ptod::gaussian(twin));
}

TEST_CASE("trim and collapse_whitespace") {
    CHECK(ptod::trim("  a b \t\n") == "a b");
    CHECK(ptod::trim("\t \n") == "");
    CHECK(ptod::trim("") == "");
    CHECK(ptod::trim("x") == "x");

    CHECK(ptod::collapse_whitespace(" a\t\t b\nc ") == "a b c");
    CHECK(ptod::collapse_whitespace("abc") == "abc");
    CHECK(ptod::collapse_whitespace("   ") == "");
}

TEST_CASE("split and join round-trip") {
    auto parts = ptod::split("a,b,,c", ',');
    REQUIRE(parts.size() == 4);
    CHECK(parts[0] == "a");
    CHECK(parts[1] == "b");
    CHECK(parts[2] == "");
    CHECK(parts[3] == "c");

    CHECK(ptod::split("", ',') == std::vector<std::string>{""});
    CHECK(ptod::split("abc", ',') == std::vector<std::string>{"abc"});
    CHECK(ptod::split("a,", ',') == std::vector<std::string>{"a", ""});

    std::mt19937_64 rng(5);
    const char alphabet[] = {'a', 'b', ','};
    for (int trial = 0; trial < 100; ++trial) {
        std::string s;
        size_t len = ptod::uniform_index(rng, 20);
        for (size_t i = 0; i < len; ++i) s.push_back(alphabet[ptod::uniform_index(rng, 3)]);
        CHECK(ptod::join(ptod::split(s, ','), ",") == s);
    }
}

TEST_CASE("tokenize_whitespace") {
    CHECK(ptod::tokenize_whitespace(" The  quick\tbrown\n") ==
          std::vector<std::string>{"The", "quick", "brown"});
    CHECK(ptod::tokenize_whitespace("").empty());
    CHECK(ptod::tokenize_whitespace(" \t\n").empty());
    CHECK(ptod::tokenize_whitespace("one") == std::vector<std::string>{"one"});
}

TEST_CASE("to_lower and contains_ci") {
    CHECK(ptod::to_lower("MiXeD 123!") == "mixed 123!");
    CHECK(ptod::contains_ci("Hello World", "WORLD"));
    CHECK(ptod::contains_ci("Hello World", ""));
    CHECK_FALSE(ptod::contains_ci("abc", "abcd"));
    CHECK_FALSE(ptod::contains_ci("abc", "d"));
}

TEST_CASE("canonical_entity strips punctuation and case") {
    CHECK(ptod::canonical_entity("The Golden-Wok, #5") == "the golden wok 5");
    CHECK(ptod::canonical_entity("  A  and B Guest House ") == "a and b guest house");
    CHECK(ptod::canonical_entity("!!!") == "");

    std::mt19937_64 rng(17);
    const std::string alphabet = "aB '-.,xY ";
    for (int trial = 0; trial < 100; ++trial) {
        std::string s;
        size_t len = ptod::uniform_index(rng, 24);
        for (size_t i = 0; i < len; ++i) s.push_back(alphabet[ptod::uniform_index(rng, alphabet.size())]);
        std::string once = ptod::canonical_entity(s);
        CHECK(ptod::canonical_entity(once) == once);
    }
}

TEST_CASE("normalize_value canonicalizes dontcare spellings") {
    CHECK(ptod::normalize_value(" Don't Care ") == "dontcare");
    CHECK(ptod::normalize_value("dont care") == "dontcare");
    CHECK(ptod::normalize_value("do not care") == "dontcare");
    CHECK(ptod::normalize_value("do n't care") == "dontcare");
    CHECK(ptod::normalize_value("dontcare") == "dontcare");
    CHECK(ptod::normalize_value(" Centre ") == "centre");
    CHECK(ptod::normalize_value("") == "");
}
