#include <gtest/gtest.h>

#include <atomic>
#include <set>
#include <vector>

#include "pndr/error.hpp"
#include "pndr/math.hpp"
#include "pndr/parallel.hpp"
#include "pndr/rng.hpp"

using namespace pndr;

TEST(Error, ExitCodes) {
    EXPECT_EQ(exit_code(ErrorKind::Config), 2);
    EXPECT_EQ(exit_code(ErrorKind::InvalidArgument), 2);
    EXPECT_EQ(exit_code(ErrorKind::Io), 3);
    EXPECT_EQ(exit_code(ErrorKind::Parse), 2);
    EXPECT_EQ(exit_code(ErrorKind::Numeric), 4);
}

TEST(Math, RotationIsOrthonormal) {
    Mat3 r = Mat3::rotation_axis(normalize(Vec3{1, 2, 3}), 0.7);
    EXPECT_LT(orthonormality_error(r), 1e-12);
    EXPECT_NEAR(r.determinant(), 1.0, 1e-12);
}

TEST(Math, ComposedPosesStayOrthonormal) {
    CounterRng rng(3, 99);
    Pose p;
    for (int i = 0; i < 1000; ++i) {
        Vec3 axis = normalize(Vec3{rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1)});
        Pose step{Mat3::rotation_axis(axis, rng.uniform(-3, 3)), {rng.uniform(), rng.uniform(), rng.uniform()}};
        p = step.compose(p);
    }
    EXPECT_LT(orthonormality_error(p.rotation), 1e-6);
    EXPECT_NEAR(p.rotation.determinant(), 1.0, 1e-6);
}

TEST(Math, PoseInverseRoundTrip) {
    Pose p{Mat3::rotation_z(0.3) * Mat3::rotation_axis({1, 0, 0}, 1.1), {0.2, -1, 3}};
    Vec3 x{0.4, 0.5, -0.6};
    Vec3 back = p.inverse().apply(p.apply(x));
    EXPECT_NEAR(back.x, x.x, 1e-12);
    EXPECT_NEAR(back.y, x.y, 1e-12);
    EXPECT_NEAR(back.z, x.z, 1e-12);
}

TEST(Math, LookAtPointsForwardAlongZ) {
    Vec3 eye{2, 0, 2};
    Pose w2c = look_at(eye, {0, 0, 0}, {0, 0, 1});
    Vec3 target = w2c.apply({0, 0, 0});
    EXPECT_NEAR(target.x, 0, 1e-12);
    EXPECT_NEAR(target.y, 0, 1e-12);
    EXPECT_NEAR(target.z, std::sqrt(8.0), 1e-12);
    Vec3 above = w2c.apply({0, 0, 1});
    EXPECT_LT(above.y, 0);  // +y is down in the image
}

TEST(Math, OrthonormalBasis) {
    for (Vec3 n : {Vec3{0, 0, 1}, Vec3{0, 0, -1}, normalize(Vec3{1, -2, 0.5})}) {
        Vec3 t, b;
        orthonormal_basis(n, t, b);
        EXPECT_NEAR(dot(t, b), 0, 1e-12);
        EXPECT_NEAR(dot(t, n), 0, 1e-12);
        EXPECT_NEAR(length(t), 1, 1e-12);
        EXPECT_NEAR(length(b), 1, 1e-12);
        EXPECT_NEAR(dot(cross(t, b), n), 1, 1e-12);
    }
}

TEST(Rng, CounterIsPure) {
    EXPECT_EQ(hash_counter(1, 2, 3), hash_counter(1, 2, 3));
    EXPECT_NE(hash_counter(1, 2, 3), hash_counter(1, 2, 4));
    EXPECT_NE(hash_counter(1, 2, 3), hash_counter(1, 3, 3));
    CounterRng a(5, Stream::Light), b(5, Stream::Light, 10);
    for (int i = 0; i < 10; ++i) a.uniform();
    EXPECT_EQ(a.uniform(), b.uniform());
}

TEST(Rng, UniformMoments) {
    CounterRng rng(11, 1);
    const int n = 100000;
    double sum = 0, sum2 = 0;
    for (int i = 0; i < n; ++i) {
        double u = rng.uniform();
        ASSERT_GE(u, 0.0);
        ASSERT_LT(u, 1.0);
        sum += u;
        sum2 += u * u;
    }
    EXPECT_NEAR(sum / n, 0.5, 0.005);
    EXPECT_NEAR(sum2 / n - 0.25, 1.0 / 12.0, 0.002);
}

TEST(Rng, NormalMoments) {
    CounterRng rng(12, 1);
    const int n = 100000;
    double sum = 0, sum2 = 0;
    for (int i = 0; i < n; ++i) {
        double z = rng.normal();
        sum += z;
        sum2 += z * z;
    }
    EXPECT_NEAR(sum / n, 0.0, 0.02);
    EXPECT_NEAR(sum2 / n, 1.0, 0.02);
}

TEST(Parallel, VisitsEveryIndexOnce) {
    for (int threads : {1, 3, 8}) {
        set_thread_count(threads);
        std::vector<std::atomic<int>> hits(1000);
        parallel_for(hits.size(), [&](std::size_t i) { hits[i]++; });
        for (auto& h : hits) EXPECT_EQ(h.load(), 1);
    }
    set_thread_count(0);
    EXPECT_GE(thread_count(), 1);
}
