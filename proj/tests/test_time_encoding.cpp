#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "dynrec/grad_check.hpp"
#include "dynrec/time_encoding.hpp"

using namespace dynrec;

TEST_CASE("encode(0) matches the closed form sqrt(1/d)[1,0,...] exactly") {
    ParameterStore ps;
    TimeEncoder enc;
    enc.init(ps, 2);
    Value out = enc.encode(0.0);
    REQUIRE(out->val.numel() == 4);
    const double s = std::sqrt(0.5);
    CHECK(out->val[0] == s);
    CHECK(out->val[1] == 0.0);
    CHECK(out->val[2] == s);
    CHECK(out->val[3] == 0.0);

    // independent of omega
    enc.omega()->val[0] = 123.0;
    enc.omega()->val[1] = -7.0;
    Value out2 = enc.encode(0.0);
    for (int i = 0; i < 4; ++i) CHECK(out2->val[i] == out->val[i]);
}

TEST_CASE("hand trig evaluation at d=2, omega=[1,2], t=pi/2") {
    ParameterStore ps;
    TimeEncoder enc;
    enc.init(ps, 2);
    enc.omega()->val[0] = 1.0;
    enc.omega()->val[1] = 2.0;
    const double t = 1.5707963267948966;
    Value out = enc.encode(t);
    const double s = std::sqrt(0.5);
    CHECK(out->val[0] == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(out->val[1] == doctest::Approx(s).epsilon(1e-12));
    CHECK(out->val[2] == doctest::Approx(-s).epsilon(1e-12));
    CHECK(out->val[3] == doctest::Approx(0.0).scale(1).epsilon(1e-12));
}

TEST_CASE("gradient wrt omega matches finite differences") {
    ParameterStore ps;
    TimeEncoder enc;
    enc.init(ps, 5);
    Value w = constant(Array::row({0.3, -0.2, 0.9, 0.1, -0.5, 0.2, 0.4, -0.1, 0.6, 0.25}));
    auto f = [&]() { return dot(enc.encode(3.7), w); };
    auto res = grad_check(f, {enc.omega()}, 1e-5);
    INFO(res.worst);
    CHECK(res.ok(1e-4));
}

TEST_CASE("unit norm over 1000 random elapsed times in [0, 1e8]") {
    ParameterStore ps;
    TimeEncoder enc;
    enc.init(ps, 64);
    Rng rng(777);
    for (int i = 0; i < 1000; ++i) {
        const double t = rng.uniform(0.0, 1e8);
        Value out = enc.encode(t);
        double norm2 = 0;
        for (double x : out->val.v) norm2 += x * x;
        CHECK(std::abs(std::sqrt(norm2) - 1.0) < 1e-9);
    }
}

TEST_CASE("negative elapsed time is a contract violation") {
    ParameterStore ps;
    TimeEncoder enc;
    enc.init(ps, 4);
    CHECK_THROWS_AS(enc.encode(-1.0), ContractViolation);
}

TEST_CASE("omega serializes under the documented checkpoint name") {
    ParameterStore ps;
    TimeEncoder enc;
    enc.init(ps, 8);
    auto sd = ps.state_dict();
    CHECK(sd.count("time.omega") == 1);
    CHECK(sd["time.omega"].numel() == 8);
}
