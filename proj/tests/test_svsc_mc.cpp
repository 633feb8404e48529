#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "svsc/bs_analytics.hpp"
#include "svsc/errors.hpp"
#include "svsc/heston.hpp"
#include "svsc/svsc_mc.hpp"

using namespace svsc;

namespace {

SvscParams fig1_model() {
    SvscParams p;
    p.heston = {2.0, 0.009924, 0.009924, 0.2536, -0.3835};
    p.gamma = 4.0;
    p.rho_bar = -0.3835;
    p.epsilon = 10.0;
    p.rho_cs = 0.7;
    p.market = {1.0, 0.0, 0.0};
    return p;
}

McConfig small(std::int64_t paths = 40000, int steps = 100) {
    McConfig c;
    c.n_paths = paths;
    c.n_steps = steps;
    c.seed = 11;
    c.bridge_correction = true;
    return c;
}

}  // namespace

TEST(Correlate, SampleCovarianceMatchesModelMatrix) {
    const double rho = -0.4, rho_cs = 0.7;
    std::mt19937_64 rng(3);
    std::normal_distribution<double> nd;
    double s[3][3] = {};
    const int n = 400000;
    for (int k = 0; k < n; ++k) {
        const auto w = correlate({nd(rng), nd(rng), nd(rng)}, rho, rho_cs);
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j) s[i][j] += w[i] * w[j] / n;
    }
    const double expect[3][3] = {{1, rho, rho_cs}, {rho, 1, rho * rho_cs}, {rho_cs, rho * rho_cs, 1}};
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) EXPECT_NEAR(s[i][j], expect[i][j], 6e-3) << i << j;
}

TEST(Correlate, DeterminantIsProductForm) {
    for (double rho : {-0.99, -0.3, 0.0, 0.5})
        for (double rc : {-0.9, 0.0, 0.7}) {
            const double det = 1 + 2 * rho * rc * rho * rc - rho * rho - rc * rc - rho * rho * rc * rc;
            EXPECT_NEAR(correlation_matrix_determinant(rho, rc), det, 1e-14);
            EXPECT_NEAR(correlation_matrix_determinant(rho, rc), (1 - rho * rho) * (1 - rc * rc), 1e-14);
        }
}

TEST(SimulateStep, CorrelationStaysInsideUnitInterval) {
    SvscParams p = fig1_model();
    p.heston.alpha = 2.0;  // large enough that truncation is exercised
    p.epsilon = 30.0;
    p.rho_cs = 0.3;
    std::mt19937_64 rng(5);
    std::normal_distribution<double> nd;
    McState s{0.0, p.heston.v0, p.heston.rho};
    int negative = 0;
    for (int i = 0; i < 20000; ++i) {
        const double before = s.v;
        simulate_step(s, 1e-3, {nd(rng), nd(rng), nd(rng)}, p);
        ASSERT_LT(std::abs(s.rho), 1.0);
        ASSERT_TRUE(std::isfinite(s.v));
        // full truncation: from a negative state only the deterministic pull back toward v_bar acts
        if (before < 0.0) {
            ++negative;
            EXPECT_NEAR(s.v, before + p.heston.beta * p.heston.v_bar * 1e-3, 1e-15);
        }
    }
    EXPECT_GT(negative, 0);
}

TEST(SvscParams, ValidateRejectsBadValues) {
    SvscParams p = fig1_model();
    p.rho_cs = 1.5;
    EXPECT_THROW(p.validate(), DomainError);
    p = fig1_model();
    p.gamma = -1.0;
    EXPECT_THROW(p.validate(), DomainError);
}

TEST(McEngine, SameSeedIsBitIdenticalAcrossThreadCounts) {
    const SvscParams p = fig1_model();
    const std::vector<Instrument> book{Vanilla{1.0, 0.5, OptionKind::Call},
                                       OneTouch{0.95, 0.5, BarrierDirection::Down}};
    McConfig c = small(5000, 50);
    const auto a = price_book_mc(p, c, book);
    c.threads = 3;
    const auto b = price_book_mc(p, c, book);
    for (std::size_t i = 0; i < book.size(); ++i) {
        EXPECT_EQ(a[i].price, b[i].price);
        EXPECT_EQ(a[i].stderr_, b[i].stderr_);
    }
    c.seed = 12;
    EXPECT_NE(price_book_mc(p, c, book)[0].price, a[0].price);
}

TEST(McEngine, MisalignedExpiryThrows) {
    const std::vector<Instrument> book{Vanilla{1.0, 0.5, OptionKind::Call}, Vanilla{1.0, 0.333, OptionKind::Call}};
    EXPECT_THROW(price_book_mc(fig1_model(), small(1000, 10), book), DomainError);
}

TEST(McEngine, MartingaleForward) {
    SvscParams p = fig1_model();
    p.market = {1.0, 0.01, 0.04};
    const auto r = price_vanilla_mc(p, small(), Vanilla{1e-9, 0.5, OptionKind::Call});
    const double expect = p.market.discount(0.5) * (p.market.forward(0.5) - 1e-9);
    EXPECT_NEAR(r.price, expect, 4.0 * r.stderr_ + 1e-12);
}

TEST(McEngine, DigitalCompleteness) {
    SvscParams p = fig1_model();
    p.market = {1.0, 0.02, 0.0};
    const std::vector<Instrument> book{EuropeanDigital{1.01, 0.5, DigitalKind::Above},
                                       EuropeanDigital{1.01, 0.5, DigitalKind::Below}};
    const auto r = price_book_mc(p, small(4000, 50), book);
    EXPECT_NEAR(r[0].price + r[1].price, p.market.discount(0.5), 1e-12);
}

TEST(McEngine, InOutParityPathwise) {
    const Vanilla u{1.0, 0.5, OptionKind::Call};
    const std::vector<Instrument> book{u, BarrierOption{u, 0.96, BarrierStyle::KnockOut, BarrierDirection::Down},
                                       BarrierOption{u, 0.96, BarrierStyle::KnockIn, BarrierDirection::Down}};
    const auto r = price_book_mc(fig1_model(), small(8000, 50), book);
    EXPECT_NEAR(r[1].price + r[2].price, r[0].price, 1e-12);
}

TEST(McEngine, BlackScholesLimit) {
    SvscParams p = fig1_model();
    p.heston = {2.0, 0.0081, 0.0081, 0.0, 0.0};
    p.rho_bar = 0.0;
    p.epsilon = 0.0;
    p.market = {1.0, 0.0, 0.05};
    const BsMarket bs = p.market.with_vol(0.09);
    const std::vector<Instrument> book{Vanilla{1.0, 0.5, OptionKind::Call},
                                       BarrierOption{{1.0, 0.5, OptionKind::Call}, 0.96, BarrierStyle::KnockOut, BarrierDirection::Down},
                                       OneTouch{1.04, 0.5, BarrierDirection::Up}};
    const auto r = price_book_mc(p, small(60000, 200), book);
    EXPECT_NEAR(r[0].price, bs_vanilla_price(bs, std::get<Vanilla>(book[0])), 3.0 * r[0].stderr_);
    EXPECT_NEAR(r[1].price, bs_barrier_price(bs, std::get<BarrierOption>(book[1])), 3.0 * r[1].stderr_);
    EXPECT_NEAR(r[2].price, bs_one_touch_price(bs, std::get<OneTouch>(book[2])), 3.0 * r[2].stderr_);
}

TEST(McEngine, HestonLimitMatchesSemiClosedForm) {
    SvscParams p = fig1_model();
    p.epsilon = 0.0;
    std::vector<Instrument> book;
    for (double K : {0.95, 1.0, 1.05}) book.push_back(Vanilla{K, 0.5, K < 1 ? OptionKind::Put : OptionKind::Call});
    const auto r = price_book_mc(p, small(100000, 200), book);
    for (std::size_t i = 0; i < book.size(); ++i) {
        const double ref = heston_vanilla_price(p.heston, p.market, std::get<Vanilla>(book[i]));
        EXPECT_NEAR(r[i].price, ref, 3.0 * r[i].stderr_) << describe(book[i]);
    }
}

TEST(McEngine, StochasticCorrelationWidensTheSmile) {
    // smile measured as wing vol over at-the-money vol; the level itself differs between the models
    const SvscParams p = fig1_model();
    const double strikes[] = {0.9554, 1.0, 1.0438};
    const auto sm = svsc_smile(p, small(600000, 25), strikes, 0.5);
    const double h[] = {heston_implied_vol(p.heston, p.market, strikes[0], 0.5),
                        heston_implied_vol(p.heston, p.market, strikes[1], 0.5),
                        heston_implied_vol(p.heston, p.market, strikes[2], 0.5)};
    const double fly = 0.5 * (sm[0].vol + sm[2].vol) - sm[1].vol;
    const double fly_h = 0.5 * (h[0] + h[2]) - h[1];
    const double se = 0.5 * sm[0].vol_stderr + 0.5 * sm[2].vol_stderr + sm[1].vol_stderr;
    EXPECT_GT(fly - fly_h, 3.0 * se);
}

TEST(FirstTouch, BucketsSumToTouchProbability) {
    SvscParams p = fig1_model();
    const McConfig c = small(20000, 100);
    const auto ft = first_touch_distribution_mc(p, c, 0.96, BarrierDirection::Down, 0.5, 10);
    double sum = 0.0;
    for (double x : ft.probability) sum += x;
    EXPECT_NEAR(sum, ft.total_probability, 1e-12);
    const auto ot = price_one_touch_mc(p, c, {0.96, 0.5, BarrierDirection::Down});
    EXPECT_NEAR(ft.total_probability, ot.price, 1e-12);  // zero rates: price is the probability
    ASSERT_EQ(ft.bucket_end.size(), 10u);
    EXPECT_NEAR(ft.bucket_end.back(), 0.5, 1e-12);
}
