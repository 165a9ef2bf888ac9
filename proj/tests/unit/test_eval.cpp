#include <doctest.h>

#include <cmath>
#include <fstream>
#include <random>

#include "support/oracles.hpp"
#include "support/tmpdir.hpp"
#include "vsn/error.hpp"
#include "vsn/eval.hpp"

using namespace vsn;
using namespace vsn::eval;

TEST_CASE("confusion arithmetic") {
    // TP=3 FP=1 FN=1 TN=5
    const std::vector<double> s = {0.9, 0.8, 0.7, 0.6, 0.2, 0.6, 0.1, 0.2, 0.3, 0.4};
    const std::vector<int> y = {1, 1, 1, 0, 1, 0, 0, 0, 0, 0};
    auto m = classification_metrics(s, y);
    CHECK(m.confusion.tp == 3);
    CHECK(m.confusion.fp == 2);
    const std::vector<double> s2 = {0.9, 0.8, 0.7, 0.6, 0.2, 0.1, 0.1, 0.2, 0.3, 0.4};
    m = classification_metrics(s2, y);
    CHECK(m.confusion.tp == 3);
    CHECK(m.confusion.fp == 1);
    CHECK(m.confusion.fn == 1);
    CHECK(m.confusion.tn == 5);
    CHECK(m.precision == 0.75);
    CHECK(m.recall == 0.75);
    CHECK(m.f1 == 0.75);
    CHECK(m.accuracy == 0.8);
}

TEST_CASE("threshold is inclusive") {
    const std::vector<double> s = {0.5, 0.49};
    const std::vector<int> y = {1, 0};
    CHECK(classification_metrics(s, y).accuracy == 1.0);
}

TEST_CASE("perfect separation and degenerate predictions") {
    const std::vector<double> s = {0.1, 0.2, 0.8, 0.9};
    const std::vector<int> y = {0, 0, 1, 1};
    const auto m = classification_metrics(s, y);
    CHECK(m.f1 == 1.0);
    CHECK(m.auc == 1.0);
    CHECK(m.accuracy == 1.0);
    const std::vector<double> none = {0.1, 0.1, 0.1, 0.1};
    const auto z = classification_metrics(none, y);
    CHECK(z.precision == 0.0);
    CHECK(z.f1 == 0.0);
    CHECK(z.auc == 0.5);
}

TEST_CASE("auc: pair oracle, reversal, monotone transforms") {
    std::mt19937_64 rng(91);
    std::uniform_real_distribution<double> u(0, 1);
    for (int trial = 0; trial < 100; ++trial) {
        std::vector<double> s(4 + rng() % 30);
        std::vector<int> y(s.size());
        for (std::size_t i = 0; i < s.size(); ++i) {
            s[i] = std::round(u(rng) * 10) / 10;  // plenty of ties
            y[i] = static_cast<int>(i % 2);
        }
        const double auc = roc_auc(s, y);
        CHECK(auc == doctest::Approx(oracle::pairwise_auc(s, y)).epsilon(1e-12));
        std::vector<double> neg(s), mono(s);
        for (std::size_t i = 0; i < s.size(); ++i) {
            neg[i] = -s[i];
            mono[i] = std::exp(3 * s[i]) - 7;
        }
        CHECK(roc_auc(neg, y) == doctest::Approx(1 - auc).epsilon(1e-12));
        CHECK(roc_auc(mono, y) == auc);

        const auto m = classification_metrics(s, y);
        if (m.precision + m.recall > 0)
            CHECK(std::abs(m.f1 - 2 * m.precision * m.recall / (m.precision + m.recall)) <= 1e-12);
        const auto& c = m.confusion;
        CHECK(m.accuracy == doctest::Approx(static_cast<double>(c.tp + c.tn) / static_cast<double>(s.size())));
    }
}

TEST_CASE("auc needs both classes") {
    const std::vector<double> s = {0.1, 0.2};
    const std::vector<int> y = {1, 1};
    CHECK_THROWS_AS(roc_auc(s, y), Error);
}

TEST_CASE("regression metrics") {
    const std::vector<double> y = {0.0, 0.5, 1.0};
    CHECK(regression_metrics(y, y).r2 == 1.0);
    CHECK(regression_metrics(y, y).rmse == 0.0);
    const std::vector<double> mean(3, 0.5);
    CHECK(regression_metrics(mean, y).r2 == doctest::Approx(0.0));
    const std::vector<double> p = {0.25, 0.5, 0.5};
    // SS_res = 0.0625 + 0 + 0.25, SS_tot = 0.5
    const auto r = regression_metrics(p, y);
    CHECK(r.r2 == doctest::Approx(1 - 0.3125 / 0.5));
    CHECK(r.rmse == doctest::Approx(std::sqrt(0.3125 / 3)));
}

TEST_CASE("labels") {
    CHECK(normalize_label(0) == 0.0);
    CHECK(normalize_label(4) == 1.0);
    CHECK(normalize_label(2) == 0.5);
    CHECK(binary_label(1) == 0);
    CHECK(binary_label(2) == 1);
    CHECK_THROWS_AS(normalize_label(5), Error);
}

TEST_CASE("epoch averaging") {
    MetricLog log;
    for (int e = 1; e <= 7; ++e) log.push_back({{"f1", e * 0.1}, {"auc", 0.5}});
    const auto avg = epoch_average(log, 5);
    CHECK(avg.at("f1") == doctest::Approx((0.3 + 0.4 + 0.5 + 0.6 + 0.7) / 5));
    CHECK(avg.at("auc") == 0.5);
    CHECK(epoch_average(log, 1).at("f1") == doctest::Approx(0.7));
    try {
        epoch_average(log, 8);
        FAIL("no throw");
    } catch (const Error& e) {
        CHECK(e.code() == Errc::TooFewEpochs);
    }
}

TEST_CASE("report csv carries provenance") {
    testutil::TempDir d;
    std::vector<ReportRow> rows = {{7, "all", "svm", {{"f1", 0.5}, {"auc", 0.75}}}};
    Provenance p;
    p.seed = 3;
    p.config_hash = "abc";
    write_report_csv(rows, p, d / "r.csv");
    std::ifstream in(d / "r.csv");
    std::string all((std::istreambuf_iterator<char>(in)), {});
    CHECK(all.find("abc") != std::string::npos);
    CHECK(all.find("0.75") != std::string::npos);
    CHECK(format_report(rows, p).find("svm") != std::string::npos);
}
