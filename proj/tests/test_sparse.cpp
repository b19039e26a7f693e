#include <gtest/gtest.h>

#include <cmath>
#include <set>

#include "sws/errors.hpp"
#include "sws/random.hpp"
#include "sws/sparse.hpp"

using namespace sws;

namespace {

Eigen::MatrixXd worked_example() {
    Eigen::MatrixXd w(5, 4);
    w << 0, 0, 0, 1,
         0, 2, 0, 0,
         0, 0, 0, 0,
         2, 5, 0, 0,
         0, 0, 0, 1;
    return w;
}

Eigen::MatrixXd random_sparse(Rng& rng, double density) {
    const auto rows = static_cast<Eigen::Index>(1 + rng.below(30));
    const auto cols = static_cast<Eigen::Index>(1 + rng.below(30));
    Eigen::MatrixXd m = Eigen::MatrixXd::Zero(rows, cols);
    for (Eigen::Index i = 0; i < m.size(); ++i) {
        if (rng.uniform() < density) m.data()[i] = std::round(rng.normal() * 8.0) / 8.0 + (rng.uniform() < 0.5 ? 0.0625 : -0.0625);
    }
    return m;
}

}  // namespace

TEST(Csr, WorkedFiveByFourExample) {
    const CsrMatrix c = to_csr(worked_example());
    EXPECT_EQ(c.values, (std::vector<double>{1, 2, 2, 5, 1}));
    EXPECT_EQ(c.row_ptr, (std::vector<std::uint32_t>{0, 1, 2, 2, 4, 5}));
    EXPECT_EQ(c.col_idx, (std::vector<std::uint32_t>{3, 1, 0, 1, 3}));
    EXPECT_DOUBLE_EQ(naive_rate(c), 1.25);
    EXPECT_DOUBLE_EQ(naive_rate(c), 20.0 / (2 * 5 + 6));
    EXPECT_EQ(from_csr(c), worked_example());
}

TEST(Csr, ZeroMatrix) {
    const CsrMatrix c = to_csr(Eigen::MatrixXd::Zero(4, 7));
    EXPECT_TRUE(c.values.empty());
    EXPECT_TRUE(c.col_idx.empty());
    EXPECT_EQ(c.row_ptr, std::vector<std::uint32_t>(5, 0));
    EXPECT_EQ(from_csr(c), Eigen::MatrixXd::Zero(4, 7));
}

TEST(Csr, RandomRoundTrips) {
    Rng rng(1);
    for (int t = 0; t < 200; ++t) {
        const Eigen::MatrixXd m = random_sparse(rng, rng.uniform());
        const CsrMatrix c = to_csr(m);
        EXPECT_NO_THROW(c.validate());
        EXPECT_EQ(from_csr(c), m);
        EXPECT_EQ(c.row_ptr.front(), 0u);
        EXPECT_EQ(c.row_ptr.back(), c.values.size());
        EXPECT_TRUE(std::is_sorted(c.row_ptr.begin(), c.row_ptr.end()));
        const auto nnz = static_cast<double>((m.array() != 0.0).count());
        EXPECT_DOUBLE_EQ(naive_rate(c), static_cast<double>(m.size()) / (2.0 * nnz + static_cast<double>(m.rows() + 1)));
    }
}

TEST(Csr, NaiveRateBounds) {
    EXPECT_LT(naive_rate(to_csr(Eigen::MatrixXd::Ones(6, 9))), 0.5);
    Eigen::MatrixXd one = Eigen::MatrixXd::Zero(10, 10);
    one(4, 7) = 0.3;
    EXPECT_NEAR(naive_rate(to_csr(one)), 100.0 / 13.0, 1e-12);
    EXPECT_NEAR(naive_rate(to_csr(one)), 7.692, 1e-3);
}

TEST(Csr, InconsistentStructureIsCorruption) {
    CsrMatrix c = to_csr(worked_example());
    CsrMatrix bad = c;
    bad.row_ptr[2] = 0;
    EXPECT_THROW(from_csr(bad), CorruptionError);
    bad = c;
    bad.col_idx[4] = 4;
    EXPECT_THROW(from_csr(bad), CorruptionError);
    bad = c;
    bad.row_ptr.back() = 6;
    EXPECT_THROW(bad.validate(), CorruptionError);
    bad = c;
    bad.col_idx[3] = 0;  // row 3 now has columns 0, 0
    EXPECT_THROW(bad.validate(), CorruptionError);
}

TEST(BitsFor, SmallestWidth) {
    EXPECT_EQ(bits_for(0), 1);
    EXPECT_EQ(bits_for(1), 1);
    EXPECT_EQ(bits_for(2), 2);
    EXPECT_EQ(bits_for(3), 2);
    EXPECT_EQ(bits_for(4), 3);
    EXPECT_EQ(bits_for(255), 8);
    EXPECT_EQ(bits_for(256), 9);
    for (std::uint64_t v = 1; v < 5000; v += 7) {
        const int p = bits_for(v);
        EXPECT_LT(v, std::uint64_t{1} << p);
        EXPECT_GE(v, std::uint64_t{1} << (p - 1));
    }
}

TEST(RelativeIndex, FillerExample) {
    const std::vector<std::uint32_t> idx{0, 14};
    const std::vector<double> val{0.5, -0.25};
    const RelIndexStream s = rel_encode(idx, val, 3);
    EXPECT_EQ(s.gaps, (std::vector<std::uint32_t>{0, 7, 5}));
    EXPECT_EQ(s.values, (std::vector<double>{0.5, 0.0, -0.25}));
    EXPECT_EQ(s.filler_count(), 1u);
    const auto [i2, v2] = rel_decode(s);
    EXPECT_EQ(i2, idx);
    EXPECT_EQ(v2, val);
}

TEST(RelativeIndex, GapOfExactlyTwoToThePFits) {
    const std::vector<std::uint32_t> idx{2, 10};
    const std::vector<double> val{1.0, 2.0};
    const RelIndexStream s = rel_encode(idx, val, 3);
    EXPECT_EQ(s.gaps, (std::vector<std::uint32_t>{2, 7}));
    EXPECT_EQ(s.filler_count(), 0u);
    const RelIndexStream t = rel_encode(std::vector<std::uint32_t>{2, 11}, val, 3);
    EXPECT_EQ(t.filler_count(), 1u);
}

TEST(RelativeIndex, RandomRoundTrips) {
    Rng rng(2);
    for (int t = 0; t < 500; ++t) {
        const int p = std::array{3, 5, 8}[t % 3];
        std::set<std::uint32_t> chosen;
        const auto n = rng.below(40);
        const auto span = 1 + rng.below(3000);
        for (std::uint64_t k = 0; k < n; ++k) chosen.insert(static_cast<std::uint32_t>(rng.below(span)));
        const std::vector<std::uint32_t> idx(chosen.begin(), chosen.end());
        std::vector<double> val;
        for (std::size_t k = 0; k < idx.size(); ++k) val.push_back(rng.uniform() < 0.5 ? -1.0 - k : 0.5 + k);
        const RelIndexStream s = rel_encode(idx, val, p);
        for (std::size_t k = 0; k < s.size(); ++k) {
            EXPECT_LT(s.gaps[k], 1u << p);
        }
        EXPECT_EQ(s.size() - s.filler_count(), idx.size());
        const auto [i2, v2] = rel_decode(s);
        EXPECT_EQ(i2, idx);
        EXPECT_EQ(v2, val);
        // independent count of fillers: each gap g > 2^p needs ceil(g / 2^p) - 1 of them
        std::size_t fillers = 0;
        std::int64_t prev = -1;
        for (auto i : idx) {
            const auto g = static_cast<std::uint64_t>(static_cast<std::int64_t>(i) - prev);
            fillers += (g + (1u << p) - 1) / (1u << p) - 1;
            prev = i;
        }
        EXPECT_EQ(s.filler_count(), fillers);
        for (std::size_t k = 0; k < s.size(); ++k) {
            if (s.values[k] == 0.0) EXPECT_EQ(s.gaps[k], (1u << p) - 1);
        }
    }
}

TEST(RelativeIndex, RejectsBadInput) {
    const std::vector<double> val{1.0, 2.0};
    EXPECT_THROW(rel_encode(std::vector<std::uint32_t>{3, 3}, val, 5), ConfigError);
    EXPECT_THROW(rel_encode(std::vector<std::uint32_t>{4, 3}, val, 5), ConfigError);
    EXPECT_THROW(rel_encode(std::vector<std::uint32_t>{1, 3}, std::vector<double>{1.0, 0.0}, 5), ConfigError);
    EXPECT_THROW(rel_encode(std::vector<std::uint32_t>{1, 3}, val, 0), ConfigError);
    EXPECT_THROW(rel_encode(std::vector<std::uint32_t>{1, 3}, val, 17), ConfigError);
    EXPECT_THROW(rel_encode(std::vector<std::uint32_t>{1}, val, 5), ConfigError);
}

TEST(Codebook, WidthFollowsTableSize) {
    const std::vector<double> same(9, 0.125);
    const CodebookEncoding a = build_codebook(same);
    EXPECT_EQ(a.codebook.table.size(), 1u);
    EXPECT_EQ(a.codebook.index_bits, 1);

    const std::vector<double> six{0.1, -0.2, 0.3, 0.1, -0.4, 0.5, 0.6, 0.3};
    const CodebookEncoding b = build_codebook(six);
    EXPECT_EQ(b.codebook.table.size(), 6u);
    EXPECT_EQ(b.codebook.index_bits, 3);
    EXPECT_TRUE(std::is_sorted(b.codebook.table.begin(), b.codebook.table.end()));

    EXPECT_EQ(build_codebook(std::vector<double>{}).codebook.table.size(), 0u);
}

TEST(Codebook, ExactReconstruction) {
    Rng rng(3);
    for (int t = 0; t < 100; ++t) {
        std::vector<double> means(1 + rng.below(20));
        for (auto& m : means) m = rng.normal();
        std::vector<double> values(rng.below(500));
        for (auto& v : values) v = means[rng.below(means.size())];
        const CodebookEncoding e = build_codebook(values);
        EXPECT_EQ(apply_codebook(e.codebook, e.indices), values);
        EXPECT_LE(e.codebook.table.size(), std::size_t{1} << e.codebook.index_bits);
    }
}

TEST(Codebook, OverflowAndBadIndices) {
    std::vector<double> many(65537);
    for (std::size_t i = 0; i < many.size(); ++i) many[i] = static_cast<double>(i) + 0.5;
    EXPECT_THROW(build_codebook(many), ConfigError);
    many.pop_back();
    EXPECT_EQ(build_codebook(many).codebook.index_bits, 16);

    const Codebook cb{{0.5, 1.5}, 1};
    EXPECT_THROW(apply_codebook(cb, std::vector<std::uint32_t>{0, 2}), CorruptionError);
}
