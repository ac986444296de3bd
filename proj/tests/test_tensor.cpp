#include <cmath>

#include <gtest/gtest.h>

#include "betak/errors.hpp"
#include "betak/tensor.hpp"

using namespace betak;

TEST(Tensor, ArithmeticAndNorms) {
    auto a = Tensor::vector({1.0, -2.0, 3.0});
    const auto b = Tensor::vector({0.5, 0.5, -1.0});
    EXPECT_EQ(a + b, Tensor::vector({1.5, -1.5, 2.0}));
    EXPECT_EQ(a - b, Tensor::vector({0.5, -2.5, 4.0}));
    EXPECT_EQ(2.0 * b, Tensor::vector({1.0, 1.0, -2.0}));
    EXPECT_EQ(hadamard(a, b), Tensor::vector({0.5, -1.0, -3.0}));
    EXPECT_EQ(sign(Tensor::vector({-0.1, 0.0, 4.0})), Tensor::vector({-1.0, 0.0, 1.0}));
    EXPECT_EQ(dot(a, b), 0.5 - 1.0 - 3.0);
    EXPECT_EQ(norm_l1(a), 6.0);
    EXPECT_EQ(norm_inf(a), 3.0);
    EXPECT_DOUBLE_EQ(norm_l2(a), std::sqrt(14.0));
    axpy(2.0, b, a);
    EXPECT_EQ(a, Tensor::vector({2.0, -1.0, 1.0}));
}

TEST(Tensor, ShapesAreChecked) {
    auto a = Tensor::vector({1.0, 2.0});
    const auto b = Tensor::vector({1.0, 2.0, 3.0});
    EXPECT_THROW(a += b, DimensionError);
    EXPECT_THROW(dot(a, b), DimensionError);
    EXPECT_THROW(Tensor({2, 2}, std::vector<double>{1.0}), DimensionError);
    EXPECT_THROW(Tensor(std::vector<std::size_t>{0}), DimensionError);
    const Tensor m({2, 3}, 1.5);
    EXPECT_EQ(m.size(), 6u);
    EXPECT_TRUE(m.all_finite());
    EXPECT_FALSE(Tensor::vector({1.0, std::nan("")}).all_finite());
}
