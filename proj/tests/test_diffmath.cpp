#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <fstream>

#include "dynrec/checkpoint.hpp"
#include "dynrec/grad_check.hpp"
#include "dynrec/nn.hpp"
#include "dynrec/sha256.hpp"

using namespace dynrec;

TEST_CASE("sha256 test vectors") {
    CHECK(Sha256::hex("") == "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
    CHECK(Sha256::hex("abc") == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
    // multi-block input
    CHECK(Sha256::hex("abcdbcdecdefdefgefghfghighijhijkijkljklmklmnlmnomnopnopq") ==
          "248d6a61d20638b8e5c026930c3e6039a33ce45964ff2167f6ecedd419db06c1");
}

TEST_CASE("affine identity and hand arithmetic") {
    Value x = constant(Array::row({1.0, 0.0}));
    Value W = leaf(Array::matrix(2, 2, {1, 0, 0, 1}), "w");
    Value b = leaf(Array::row({0.0, 0.0}), "b");
    Value y = affine(x, W, b);
    CHECK(y->val[0] == 1.0);
    CHECK(y->val[1] == 0.0);

    Value x2 = constant(Array::row({1.0, 2.0}));
    Value W2 = leaf(Array::matrix(2, 1, {1, 1}), "w2");
    Value b2 = leaf(Array::row({0.5}), "b2");
    Value y2 = affine(x2, W2, b2);
    CHECK(y2->val[0] == doctest::Approx(3.5).epsilon(1e-12));
}

TEST_CASE("affine shape mismatch names both shapes") {
    Value x = constant(Array::row({1.0, 2.0, 3.0}));
    Value W = leaf(Array::matrix(2, 2, {1, 0, 0, 1}), "w");
    Value b = leaf(Array::row({0.0, 0.0}), "b");
    CHECK_THROWS_WITH_AS(affine(x, W, b), doctest::Contains("(3)"), DimensionError);
}

TEST_CASE("gradient of sum(xW+b) wrt W equals outer-product oracle") {
    Rng rng(11);
    Value x = constant(uniform_init(rng, {3}, 3));
    Value W = leaf(uniform_init(rng, {3, 2}, 3), "w");
    Value b = leaf(uniform_init(rng, {2}, 3), "b");
    Value loss = sum_all(affine(x, W, b));
    backward(loss);
    // d sum(xW+b) / dW_ij = x_i
    for (std::size_t i = 0; i < 3; ++i)
        for (std::size_t j = 0; j < 2; ++j)
            CHECK(W->grad.at(i, j) == doctest::Approx(x->val[i]).epsilon(1e-12));
    for (std::size_t j = 0; j < 2; ++j) CHECK(b->grad[j] == doctest::Approx(1.0).epsilon(1e-12));

    auto res = grad_check([&]() { return sum_all(affine(x, W, b)); }, {W, b}, 1e-5);
    CHECK(res.ok(1e-4));
}

TEST_CASE("softmax rows: sums to one, shift invariant") {
    Rng rng(3);
    Array logits = uniform_init(rng, {2, 5}, 1);
    Value a = constant(logits);
    Value s = softmax_rows(a);
    for (std::size_t r = 0; r < 2; ++r) {
        double total = 0;
        for (std::size_t c = 0; c < 5; ++c) total += s->val.at(r, c);
        CHECK(std::abs(total - 1.0) < 1e-12);
    }
    Array shifted = logits;
    for (std::size_t c = 0; c < 5; ++c) shifted.at(0, c) += 7.25;
    Value s2 = softmax_rows(constant(shifted));
    for (std::size_t c = 0; c < 5; ++c)
        CHECK(s2->val.at(0, c) == doctest::Approx(s->val.at(0, c)).epsilon(1e-12));
}

TEST_CASE("softmax gradient vs finite differences") {
    Rng rng(5);
    Value a = leaf(uniform_init(rng, {1, 4}, 1), "logits");
    Value w = constant(Array::row({0.3, -0.7, 1.1, 0.2}));
    auto f = [&]() { return dot(softmax_rows(a), w); };
    auto res = grad_check(f, {a}, 1e-5);
    CHECK(res.ok(1e-4));
}

TEST_CASE("dropout is identity in eval mode and unbiased in training") {
    Rng rng(17);
    Value a = constant(Array::row(std::vector<double>(8, 1.0)));
    Value e = dropout(a, 0.3, rng, /*train=*/false);
    CHECK(e.get() == a.get());

    // surviving entries scaled by 1/(1-p): mean over many draws ~ 1
    const int draws = 100000;
    double sum = 0;
    for (int i = 0; i < draws; ++i) {
        Value d = dropout(a, 0.3, rng, true);
        sum += d->val[0];
    }
    const double mean = sum / draws;
    const double p = 0.3;
    // one surviving draw contributes 1/(1-p); variance p/(1-p)
    const double se = std::sqrt(p / (1 - p) / draws);
    CHECK(std::abs(mean - 1.0) < 3 * se);
}

TEST_CASE("dropout rejects rate outside [0,1)") {
    Rng rng(1);
    Value a = constant(Array::row({1.0}));
    CHECK_THROWS_AS(dropout(a, 1.0, rng, true), ConfigError);
    CHECK_THROWS_AS(dropout(a, -0.1, rng, true), ConfigError);
}

TEST_CASE("attention: singleton token gets weight exactly 1") {
    Rng rng(7);
    ParameterStore ps;
    MhaBlock mha;
    mha.init(ps, "mha", 6, 4, 4, 5, 2, rng);
    Value query = constant(uniform_init(rng, {6}, 1));
    Value token = constant(uniform_init(rng, {1, 4}, 1));
    Array weights;
    Value out = mha.apply(query, token, &weights);
    CHECK(weights.rows() == 2);
    CHECK(weights.cols() == 1);
    CHECK(weights.at(0, 0) == 1.0);
    CHECK(weights.at(1, 0) == 1.0);
    // output equals the output-projection of the single projected value
    Value v = affine(token, mha.Wv, mha.bv);
    Value expect = affine(v, mha.Wo, mha.bo);
    for (std::size_t i = 0; i < 5; ++i)
        CHECK(out->val[i] == doctest::Approx(expect->val[i]).epsilon(1e-12));
}

TEST_CASE("attention: two identical tokens split weight 0.5/0.5") {
    Rng rng(9);
    ParameterStore ps;
    MhaBlock mha;
    mha.init(ps, "mha", 4, 4, 8, 4, 2, rng);
    Array tok = uniform_init(rng, {4}, 1);
    Array two = Array::zeros({2, 4});
    for (int i = 0; i < 4; ++i) {
        two.at(0, i) = tok[i];
        two.at(1, i) = tok[i];
    }
    Array weights;
    mha.apply(constant(uniform_init(rng, {4}, 1)), constant(two), &weights);
    for (std::size_t h = 0; h < 2; ++h) {
        CHECK(weights.at(h, 0) == doctest::Approx(0.5).epsilon(1e-12));
        CHECK(weights.at(h, 1) == doctest::Approx(0.5).epsilon(1e-12));
    }
}

TEST_CASE("attention projections pass finite-difference check") {
    Rng rng(13);
    ParameterStore ps;
    MhaBlock mha;
    mha.init(ps, "mha", 5, 6, 4, 3, 2, rng);
    Value query = leaf(uniform_init(rng, {5}, 1), "query");
    Value tokens = leaf(uniform_init(rng, {3, 6}, 1), "tokens");
    auto f = [&]() { return sum_all(vtanh(mha.apply(query, tokens))); };
    std::vector<Value> leaves{query, tokens};
    for (auto& p : ps.ordered()) leaves.push_back(p);
    auto res = grad_check(f, leaves, 1e-5);
    INFO(res.worst);
    CHECK(res.ok(1e-4));
}

TEST_CASE("gru: all-zero weights halve the hidden state") {
    ParameterStore ps;
    Rng rng(21);
    GruCell gru;
    gru.init(ps, "gru", 3, 2, rng);
    for (auto& p : ps.ordered()) std::fill(p->val.v.begin(), p->val.v.end(), 0.0);
    Value h = constant(Array::row({0.4, -1.2, 2.0}));
    Value x = constant(Array::row({5.0, -3.0}));
    Value out = gru.apply(h, x);
    CHECK(out->val.numel() == 3);
    for (std::size_t i = 0; i < 3; ++i)
        CHECK(out->val[i] == doctest::Approx(0.5 * h->val[i]).epsilon(1e-12));
}

TEST_CASE("gru: output shape equals hidden shape; mismatch throws") {
    ParameterStore ps;
    Rng rng(22);
    GruCell gru;
    gru.init(ps, "gru", 4, 3, rng);
    Value h = constant(uniform_init(rng, {4}, 1));
    Value x = constant(uniform_init(rng, {3}, 1));
    CHECK(gru.apply(h, x)->val.numel() == 4);
    Value bad = constant(uniform_init(rng, {5}, 1));
    CHECK_THROWS_AS(gru.apply(bad, x), DimensionError);
}

TEST_CASE("gru gradients wrt all weight matrices match finite differences") {
    ParameterStore ps;
    Rng rng(23);
    GruCell gru;
    gru.init(ps, "gru", 3, 2, rng);
    Value h = leaf(uniform_init(rng, {3}, 1), "h");
    Value x = leaf(uniform_init(rng, {2}, 1), "x");
    auto f = [&]() { return sum_all(gru.apply(h, x)); };
    std::vector<Value> leaves{h, x};
    for (auto& p : ps.ordered()) leaves.push_back(p);
    auto res = grad_check(f, leaves, 1e-5);
    INFO(res.worst);
    CHECK(res.ok(1e-4));
}

TEST_CASE("grad_check harness: polynomial, tanh, and a planted wrong gradient") {
    // f(x) = x^2 at x=3: analytic 6
    Value x = leaf(Array::row({3.0}), "x");
    auto res = grad_check([&]() { return sum_sq(x); }, {x}, 1e-5);
    CHECK(res.max_rel_err < 1e-8);

    Value y = leaf(Array::row({0.5}), "y");
    auto res2 = grad_check([&]() { return sum_all(vtanh(y)); }, {y}, 1e-5);
    CHECK(res2.max_rel_err < 1e-6);

    // deliberately doubled analytic gradient: |2g-g|/max(2g,g) = 0.5, flagged.
    // (relative error uses the documented max(|analytic|,|numeric|,1e-8)
    // denominator, so the planted factor-2 error reads as 0.5)
    Value z = leaf(Array::row({1.5}), "z");
    auto wrong = [&]() {
        Value out = sum_sq(z);
        Value doubled = scale(out, 1.0);
        doubled->parents = {z};
        doubled->tracked = true;
        doubled->backfn = [&z](TapeNode& n) { z->g()[0] += 2.0 * (2.0 * z->val[0]) * n.grad[0]; };
        return doubled;
    };
    auto res3 = grad_check(wrong, {z}, 1e-5);
    CHECK(res3.max_rel_err == doctest::Approx(0.5).epsilon(1e-6));
    CHECK(!res3.ok(1e-4));
}

TEST_CASE("grad_check reports non-finite values with the leaf name") {
    Value x = leaf(Array::row({0.0}), "badleaf");
    auto f = [&]() {
        Value inv = scale(x, 1.0);
        Array v = inv->val;
        // a computation that blows up at x=0
        Value out = constant(Array::scalar(1.0 / v[0]));
        out->tracked = true;
        out->parents = {x};
        out->backfn = [&x](TapeNode& n) { x->g()[0] += n.grad[0] * (-1.0 / (x->val[0] * x->val[0])); };
        return out;
    };
    auto res = grad_check(f, {x}, 1e-5);
    CHECK(!res.finite);
    CHECK(res.failure.find("badleaf") != std::string::npos);
}

TEST_CASE("checkpoint container round-trips and validates magic") {
    std::map<std::string, Array> arrays;
    arrays["alpha"] = Array::row({1.5, -2.25, 3.75});
    arrays["beta.mat"] = Array::matrix(2, 2, {0.1, 0.2, 0.3, 0.4});
    const std::string path = "ckpt_test.bin";
    save_arrays(path, arrays);

    auto loaded = load_arrays(path);
    REQUIRE(loaded.size() == 2);
    CHECK(loaded["alpha"].shape == std::vector<std::size_t>{3});
    CHECK(loaded["beta.mat"].shape == (std::vector<std::size_t>{2, 2}));
    for (std::size_t i = 0; i < 4; ++i) CHECK(loaded["beta.mat"][i] == arrays["beta.mat"][i]);

    // first bytes are the magic
    std::ifstream is(path, std::ios::binary);
    char head[8];
    is.read(head, 8);
    CHECK(std::string(head, 8) == "DYNLLM01");
    is.close();

    std::ofstream bad("ckpt_bad.bin", std::ios::binary);
    bad << "NOTMAGIC garbage";
    bad.close();
    CHECK_THROWS_AS(load_arrays("ckpt_bad.bin"), CheckpointError);
    std::remove(path.c_str());
    std::remove("ckpt_bad.bin");
}

TEST_CASE("parameter store: unique names, zero grads, state dict round trip") {
    ParameterStore ps;
    Rng rng(31);
    ps.add("a", uniform_init(rng, {3}, 3));
    ps.add("b", uniform_init(rng, {2, 2}, 2));
    CHECK_THROWS_AS(ps.add("a", Array::row({1})), ConfigError);

    auto sd = ps.state_dict();
    ParameterStore ps2;
    Rng rng2(99);
    ps2.add("a", uniform_init(rng2, {3}, 3));
    ps2.add("b", uniform_init(rng2, {2, 2}, 2));
    ps2.load_state_dict(sd);
    for (std::size_t i = 0; i < 3; ++i) CHECK(ps2.get("a")->val[i] == ps.get("a")->val[i]);
}

TEST_CASE("adam drives a quadratic toward its minimum") {
    ParameterStore ps;
    Value x = ps.add("x", Array::row({4.0, -3.0}));
    Adam opt(0.05);
    for (int step = 0; step < 400; ++step) {
        ps.zero_grads();
        Value loss = sum_sq(x);
        backward(loss);
        opt.step(ps);
        release_graph(loss);
    }
    CHECK(std::abs(x->val[0]) < 1e-2);
    CHECK(std::abs(x->val[1]) < 1e-2);
}

TEST_CASE("neg_log_sigmoid matches the closed forms used by the ranking loss") {
    Value a = constant(Array::row({0.0, 2.0}));
    Value out = neg_log_sigmoid(a);
    CHECK(out->val[0] == doctest::Approx(std::log(2.0)).epsilon(1e-12));
    CHECK(out->val[1] == doctest::Approx(0.126928011042972).epsilon(1e-9));

    Value b = leaf(Array::row({0.7, -1.3}), "b");
    auto res = grad_check([&]() { return sum_all(neg_log_sigmoid(b)); }, {b}, 1e-5);
    CHECK(res.ok(1e-4));
}
