#include "scratch/classifier.hpp"
#include "scratch/toy.hpp"

#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <thread>

using namespace scratch;

namespace {

std::string temp_path(const std::string& name) {
    return (std::filesystem::temp_directory_path() / name).string();
}

BuiltinMlp::Layer layer(std::initializer_list<std::initializer_list<double>> w,
                        std::initializer_list<double> b) {
    BuiltinMlp::Layer l;
    l.weight.resize(w.size(), w.begin()->size());
    Index r = 0;
    for (const auto& row : w) {
        Index c = 0;
        for (double v : row) l.weight(r, c++) = v;
        ++r;
    }
    l.bias.resize(b.size());
    Index i = 0;
    for (double v : b) l.bias[i++] = v;
    return l;
}

Image tiny_image(Index h, Index w, double fill) {
    Image img(h, w);
    for (auto& p : img.plane) p.setConstant(fill);
    return img;
}

}  // namespace

TEST_CASE("zero weights give a uniform probability vector") {
    BuiltinMlp::Layer l;
    l.weight = Matrix::Zero(3, 12);
    l.bias = Vector::Zero(3);
    BuiltinMlp model({l}, {}, "test");
    Image x = tiny_image(2, 2, 0.7);
    ProbVector p = model.predict_raw(x);
    REQUIRE(p.size() == 3);
    for (int i = 0; i < 3; ++i) CHECK(p[i] == doctest::Approx(1.0 / 3));
}

TEST_CASE("a toy affine layer matches a hand-computed softmax") {
    // 3 classes, 4 features; logits z = W x + b computed by hand in the
    // assertions below for x = (1, 2, 0, -1).
    BuiltinMlp model({layer({{1, 0, 0, 0}, {0, 1, 0, 1}, {2, 0, 1, 0}}, {0.5, -0.5, 0.0})}, {},
                     "test");
    Vector x(4);
    x << 1, 2, 0, -1;
    ProbVector p = model.predict_flat(x);
    // z = (1.5, 0.5, 2.0)
    double e0 = std::exp(1.5), e1 = std::exp(0.5), e2 = std::exp(2.0);
    double z = e0 + e1 + e2;
    CHECK(p[0] == doctest::Approx(e0 / z).epsilon(1e-12));
    CHECK(p[1] == doctest::Approx(e1 / z).epsilon(1e-12));
    CHECK(p[2] == doctest::Approx(e2 / z).epsilon(1e-12));
    int argmax;
    p.maxCoeff(&argmax);
    CHECK(argmax == 2);
}

TEST_CASE("relu applies between layers, softmax at the end") {
    // First layer flips the sign, ReLU kills positive inputs turned
    // negative; verified against a by-hand composition.
    BuiltinMlp model({layer({{-1.0}, {1.0}}, {0.0, 0.0}), layer({{1.0, 2.0}, {0.0, 0.0}}, {0.0, 0.0})},
                     {}, "test");
    Vector x(1);
    x << 3.0;
    // hidden = relu(-3, 3) = (0, 3); logits = (6, 0)
    ProbVector p = model.predict_flat(x);
    double e0 = std::exp(6.0), e1 = std::exp(0.0);
    CHECK(p[0] == doctest::Approx(e0 / (e0 + e1)));
}

TEST_CASE("builtin predictions are deterministic valid distributions") {
    Rng rng(3);
    std::vector<BuiltinMlp::Layer> layers;
    BuiltinMlp::Layer l1;
    l1.weight = Matrix::NullaryExpr(8, 27, [&] { return rng.normal(); });
    l1.bias = Vector::NullaryExpr(8, [&] { return rng.normal(); });
    BuiltinMlp::Layer l2;
    l2.weight = Matrix::NullaryExpr(4, 8, [&] { return rng.normal(); });
    l2.bias = Vector::NullaryExpr(4, [&] { return rng.normal(); });
    BuiltinMlp model({l1, l2}, {}, "test");

    for (int trial = 0; trial < 50; ++trial) {
        Image x(3, 3);
        for (auto& pl : x.plane)
            pl = Eigen::ArrayXXd::NullaryExpr(3, 3, [&] { return rng.uniform(-40.0, 40.0); });
        ProbVector a = model.predict_raw(x);
        ProbVector b = model.predict_raw(x);
        CHECK((a.array() == b.array()).all());
        CHECK((a.array() >= 0.0).all());
        CHECK(std::abs(a.sum() - 1.0) <= 1e-6);
    }
}

TEST_CASE("inputs of the wrong dimension are rejected") {
    BuiltinMlp::Layer l;
    l.weight = Matrix::Zero(3, 12);  // expects a 2x2 image
    l.bias = Vector::Zero(3);
    BuiltinMlp model({l}, {}, "test");
    CHECK_THROWS_AS(model.predict_raw(tiny_image(3, 3, 0.5)), DimensionError);
}

TEST_CASE("mismatched layer shapes are rejected with both shapes named") {
    BuiltinMlp::Layer l1;
    l1.weight = Matrix::Zero(5, 12);
    l1.bias = Vector::Zero(5);
    BuiltinMlp::Layer l2;
    l2.weight = Matrix::Zero(3, 4);  // expects 4 inputs, gets 5
    l2.bias = Vector::Zero(3);
    try {
        BuiltinMlp model({l1, l2}, {}, "test");
        FAIL("expected DimensionError");
    } catch (const DimensionError& e) {
        std::string msg = e.what();
        CHECK(msg.find("4") != std::string::npos);
        CHECK(msg.find("5") != std::string::npos);
    }
}

TEST_CASE("weight files round-trip through save and load") {
    Rng rng(9);
    BuiltinMlp::Layer l1;
    l1.weight = Matrix::NullaryExpr(6, 12, [&] { return rng.normal(); });
    l1.bias = Vector::NullaryExpr(6, [&] { return rng.normal(); });
    BuiltinMlp::Layer l2;
    l2.weight = Matrix::NullaryExpr(3, 6, [&] { return rng.normal(); });
    l2.bias = Vector::NullaryExpr(3, [&] { return rng.normal(); });
    BuiltinMlp model({l1, l2}, {}, "original");

    std::string path = temp_path("scratch_roundtrip.scr1");
    save_builtin(model, path);
    auto loaded = load_builtin(path);
    CHECK(loaded->num_classes() == 3);
    CHECK(loaded->input_dimension() == 12);

    Image x = tiny_image(2, 2, 0.4);
    ProbVector a = model.predict_raw(x);
    ProbVector b = loaded->predict_raw(x);
    // float32 storage rounds the weights
    CHECK((a - b).cwiseAbs().maxCoeff() < 1e-6);
    std::remove(path.c_str());
}

TEST_CASE("corrupted weight files fail their checksum") {
    BuiltinMlp::Layer l;
    l.weight = Matrix::Zero(3, 12);
    l.bias = Vector::Zero(3);
    std::string path = temp_path("scratch_corrupt.scr1");
    save_builtin(BuiltinMlp({l}, {}, "x"), path);

    std::fstream f(path, std::ios::in | std::ios::out | std::ios::binary);
    f.seekp(20);
    f.put(static_cast<char>(0x5a));
    f.close();
    CHECK_THROWS_WITH_AS(static_cast<void>(load_builtin(path)),
                         doctest::Contains("checksum"), Error);
    std::remove(path.c_str());
}

TEST_CASE("truncated weight files are rejected") {
    std::string path = temp_path("scratch_bad.scr1");
    {
        std::ofstream out(path, std::ios::binary);
        out << "SCR1";
    }
    CHECK_THROWS(static_cast<void>(load_builtin(path)));
    std::remove(path.c_str());
}

TEST_CASE("ledger enforces its budget atomically") {
    QueryLedger ledger(3);
    BuiltinMlp::Layer l;
    l.weight = Matrix::Zero(2, 3);
    l.bias = Vector::Zero(2);
    BuiltinMlp model({l}, {}, "test");
    Image x = tiny_image(1, 1, 0.5);

    CHECK(predict(model, ledger, x).size() == 2);
    CHECK(predict(model, ledger, x).size() == 2);
    CHECK(predict(model, ledger, x).size() == 2);
    CHECK(ledger.used() == 3);
    CHECK_THROWS_AS(predict(model, ledger, x), BudgetExhausted);
    CHECK(ledger.used() == 3);  // unchanged by the failed call
}

TEST_CASE("concurrent consumers never overdraw the ledger") {
    QueryLedger ledger(1000);
    std::atomic<int> successes{0};
    std::vector<std::thread> pool;
    for (int t = 0; t < 8; ++t)
        pool.emplace_back([&] {
            for (int i = 0; i < 500; ++i) {
                try {
                    ledger.consume();
                    successes.fetch_add(1);
                } catch (const BudgetExhausted&) {
                }
            }
        });
    for (auto& th : pool) th.join();
    CHECK(successes.load() == 1000);
    CHECK(ledger.used() == 1000);
}

TEST_CASE("the bundled toy classifier reaches 90% held-out accuracy") {
    auto model = load_builtin(TOY_MODEL_PATH);
    auto test_set = toy::toy_dataset(150, toy::kTestSeed);
    int correct = 0;
    for (const auto& item : test_set) {
        int pred;
        model->predict_raw(item.image).maxCoeff(&pred);
        correct += pred == item.label;
    }
    CHECK(double(correct) / test_set.size() >= 0.90);
}
