#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <sstream>
#include <vector>

#include "segen/grad_check.h"
#include "segen/lattice.h"
#include "segen/logspace.h"
#include "segen/oracle.h"
#include "segen/randgen.h"

using namespace segen;
using ad::Tape;
using ad::Tensor;
using ad::Var;

namespace {

struct Built {
  Tape tp;
  Bound b;
  SourceEncoding src;
  DecoderChain chain;
  SegmentScoreCache cache;
  EvalCounter counter;
};

// Builds the whole scoring stack for a tiny case on one tape.
std::unique_ptr<Built> build_case(const TinyCase& tc) {
  auto out = std::make_unique<Built>();
  out->b = bind(out->tp, tc.mp);
  Rng rr(0);
  out->src = encode_source(out->tp, out->b, tc.mp, tc.enc, false, rr);
  out->chain =
      build_decoder_chain(out->tp, out->b, tc.mp, tc.enc, out->src, false, rr);
  out->cache = precompute_segment_scores(
      out->tp, out->b, tc.enc, out->src, out->chain, tc.L,
      tc.mp.cfg.allow_null_self_transition, &out->counter);
  return out;
}

std::vector<std::vector<std::vector<double>>> zero_gen(int m, int K, int L) {
  std::vector<std::vector<std::vector<double>>> gen(static_cast<size_t>(m));
  for (int a = 1; a <= m; ++a)
    gen[static_cast<size_t>(a - 1)].assign(
        static_cast<size_t>(std::min(L, m - a + 1)),
        std::vector<double>(static_cast<size_t>(K) + 1, 0.0));
  return gen;
}

std::vector<std::vector<std::vector<double>>> zero_trans(int m, int K) {
  return std::vector<std::vector<std::vector<double>>>(
      static_cast<size_t>(m),
      std::vector<std::vector<double>>(
          static_cast<size_t>(K) + 1,
          std::vector<double>(static_cast<size_t>(K) + 1, 0.0)));
}

}  // namespace

TEST_CASE("one-token cache holds one entry per record plus the prior") {
  Rng rng(2);
  TinyCase tc;
  // Redraw until the shape matches the counting example: m=1, K=1.
  do {
    tc = make_tiny_case(rng);
  } while (tc.enc.m != 1 || tc.enc.K != 1);
  tc.L = 1;
  auto built = build_case(tc);
  REQUIRE(built->cache.gen.size() == 1);
  REQUIRE(built->cache.gen[0].size() == 1);
  CHECK(built->cache.gen[0][0].size() == 2);
  CHECK(built->cache.trans.empty());
  CHECK(built->tp.tensor(built->cache.prior).size() == 2);
}

TEST_CASE("cache entries equal fresh segment scores") {
  Rng rng(31);
  for (int trial = 0; trial < 8; ++trial) {
    TinyCase tc = make_tiny_case(rng);
    auto built = build_case(tc);
    for (int a = 1; a <= tc.enc.m; ++a) {
      for (int len = 1; len <= std::min(tc.L, tc.enc.m - a + 1); ++len) {
        for (int j = 0; j <= tc.enc.K; ++j) {
          Var fresh = segment_logprob(built->tp, built->b, tc.enc, built->src,
                                      built->chain.views, a, a + len - 1, j);
          CHECK(std::abs(built->tp.val(built->cache.gen_at(a, len, j)) -
                         built->tp.val(fresh)) <= 1e-12);
        }
      }
    }
  }
}

TEST_CASE("extending a cached segment swaps the closing factor") {
  Rng rng(37);
  TinyCase tc;
  do {
    tc = make_tiny_case(rng);
  } while (tc.enc.m < 3 || tc.L < 2);
  auto built = build_case(tc);
  Tape& tp = built->tp;

  auto logprob_of = [&](int t, int j, int ext_id) {
    Attention att = masked_attention(tp, built->b, built->src,
                                     built->chain.views[static_cast<size_t>(t)], j);
    OutputDist dist = output_distribution(
        tp, built->b, tc.enc, built->chain.views[static_cast<size_t>(t)], att);
    return tp.tensor(dist.log_probs).v[static_cast<size_t>(ext_id)];
  };
  for (int a = 1; a <= tc.enc.m; ++a) {
    for (int len = 2; len <= std::min(tc.L, tc.enc.m - a + 1); ++len) {
      for (int j = 0; j <= tc.enc.K; ++j) {
        int last = a + len - 1;  // 1-based position of the added token
        double expected =
            built->tp.val(built->cache.gen_at(a, len - 1, j)) -
            logprob_of(last - 1, j, Vocabulary::kEndOfSegment) +
            logprob_of(last - 1, j,
                       tc.enc.target_ext_ids[static_cast<size_t>(last - 1)]) +
            logprob_of(last, j, Vocabulary::kEndOfSegment);
        CHECK(std::abs(built->tp.val(built->cache.gen_at(a, len, j)) -
                       expected) <= 1e-12);
      }
    }
  }
}

TEST_CASE("scoring-call budget of the cache") {
  Rng rng(41);
  for (int trial = 0; trial < 4; ++trial) {
    TinyCase tc = make_tiny_case(rng);
    auto built = build_case(tc);
    int m = tc.enc.m, K = tc.enc.K;
    int n = static_cast<int>(tc.enc.source_ids.size());
    // Token distributions at states 0..m for each record attend to that
    // record's span; transition scoring revisits the previous record's
    // span at each interior boundary. Spans partition the source.
    CHECK(built->counter.attention_scores == 2L * m * n);
    CHECK(built->counter.transition_scores ==
          (1L + static_cast<long>(m - 1) * (K + 1)) * (K + 1));
  }
}

TEST_CASE("empty target is rejected") {
  Tape tp;
  SegmentScoreCache cache =
      cache_from_tables(tp, 0, 1, 1, {}, {0.0, 0.0}, {});
  CHECK_THROWS_AS(run_forward(tp, cache, false), std::invalid_argument);
}

TEST_CASE("one-token likelihood enumerates the prior in closed form") {
  Rng rng(43);
  TinyCase tc;
  do {
    tc = make_tiny_case(rng);
  } while (tc.enc.m != 1);
  auto built = build_case(tc);
  Tape& tp = built->tp;
  Var ll = forward_loglik(tp, built->cache);
  double manual = segen::logspace::kNegInf;
  for (int j = 0; j <= tc.enc.K; ++j)
    manual = segen::logspace::log_add(
        manual, tp.tensor(built->cache.prior).v[static_cast<size_t>(j)] +
                    tp.val(built->cache.gen_at(1, 1, j)));
  CHECK(std::abs(tp.val(ll) - manual) <= 1e-12);
  CHECK(std::abs(tp.val(ll) - brute_loglik(tc.enc, tc.mp, tc.L)) <= 1e-6);
}

TEST_CASE("unit scores count the valid hypotheses") {
  for (bool null_self : {false, true}) {
    Tape tp;
    int m = 4, K = 2, L = 2;
    SegmentScoreCache cache =
        cache_from_tables(tp, m, K, L, zero_gen(m, K, L),
                          std::vector<double>(static_cast<size_t>(K) + 1, 0.0),
                          zero_trans(m, K), null_self);
    double count = static_cast<double>(
        enumerate_segmentations(m, K, L, null_self).size());
    CHECK(tp.val(forward_loglik(tp, cache)) ==
          doctest::Approx(std::log(count)).epsilon(1e-12));
  }
}

TEST_CASE("one-token expectation is exactly one") {
  Rng rng(47);
  TinyCase tc;
  do {
    tc = make_tiny_case(rng);
  } while (tc.enc.m != 1);
  auto built = build_case(tc);
  CHECK(built->tp.val(expected_segments(built->tp, built->cache)) == 1.0);
}

TEST_CASE("balanced two-token toy expects one and a half segments") {
  Tape tp;
  int m = 2, K = 1, L = 2;
  SegmentScoreCache cache =
      cache_from_tables(tp, m, K, L, zero_gen(m, K, L), {0.0, 0.0},
                        zero_trans(m, K));
  ForwardLattice lat = run_forward(tp, cache, true);
  // Both segmentations carry equal posterior: two one-segment labelings
  // and two two-segment labelings, all with unit weight, so each final
  // cell holds one single-segment path and one split path.
  for (int j = 0; j <= K; ++j) {
    CHECK(tp.val(lat.alpha[0][static_cast<size_t>(j)]) == 0.0);
    CHECK(tp.val(lat.alpha[1][static_cast<size_t>(j)]) ==
          doctest::Approx(std::log(2.0)).epsilon(1e-12));
  }
  CHECK(tp.val(lat.expected) == doctest::Approx(1.5).epsilon(1e-12));
  CHECK(brute_expected_segments_tables(m, K, L, zero_gen(m, K, L),
                                       {0.0, 0.0}, zero_trans(m, K)) ==
        doctest::Approx(1.5).epsilon(1e-12));
}

TEST_CASE("recursions agree with exhaustive enumeration") {
  Rng rng(53);
  for (int trial = 0; trial < 40; ++trial) {
    TinyCase tc = make_tiny_case(rng);
    auto built = build_case(tc);
    ForwardLattice lat = run_forward(built->tp, built->cache, true);
    INFO("trial " << trial << " m=" << tc.enc.m << " K=" << tc.enc.K
                  << " L=" << tc.L);
    CHECK(std::abs(built->tp.val(lat.loglik) -
                   brute_loglik(tc.enc, tc.mp, tc.L)) <= 1e-6);
    CHECK(std::abs(built->tp.val(lat.expected) -
                   brute_expected_segments(tc.enc, tc.mp, tc.L)) <= 1e-6);
  }
}

TEST_CASE("linear and log count accumulators agree") {
  Rng rng(59);
  for (int trial = 0; trial < 10; ++trial) {
    TinyCase tc = make_tiny_case(rng);
    if (tc.enc.m < 2) continue;
    auto built = build_case(tc);
    double linear =
        built->tp.val(expected_segments(built->tp, built->cache, 64));
    double logged =
        built->tp.val(expected_segments(built->tp, built->cache, 0));
    CHECK(std::abs(linear - logged) <= 1e-9);
  }
}

TEST_CASE("adding a record never lowers the likelihood") {
  Rng rng(61);
  for (int trial = 0; trial < 10; ++trial) {
    int m = rng.uniform_int(2, 5);
    int K = rng.uniform_int(1, 2);
    int L = rng.uniform_int(1, 3);
    auto gen = zero_gen(m, K, L);
    for (auto& a : gen)
      for (auto& row : a)
        for (double& x : row) x = rng.uniform(-3.0, 0.0);
    std::vector<double> prior(static_cast<size_t>(K) + 1);
    for (double& x : prior) x = rng.uniform(-3.0, 0.0);
    auto trans = zero_trans(m, K);
    for (auto& by_q : trans)
      for (auto& row : by_q)
        for (double& x : row) x = rng.uniform(-3.0, 0.0);

    // Extend every table with one more record whose scores are arbitrary;
    // entries shared with the original problem are untouched.
    auto gen2 = gen;
    for (auto& a : gen2)
      for (auto& row : a) row.push_back(rng.uniform(-3.0, 0.0));
    auto prior2 = prior;
    prior2.push_back(rng.uniform(-3.0, 0.0));
    auto trans2 = zero_trans(m, K + 1);
    for (int p = 0; p < m; ++p)
      for (int q = 0; q <= K + 1; ++q)
        for (int j = 0; j <= K + 1; ++j)
          trans2[static_cast<size_t>(p)][static_cast<size_t>(q)]
                [static_cast<size_t>(j)] =
                    (q <= K && j <= K)
                        ? trans[static_cast<size_t>(p)][static_cast<size_t>(q)]
                               [static_cast<size_t>(j)]
                        : rng.uniform(-3.0, 0.0);

    Tape tp;
    double small = tp.val(forward_loglik(
        tp, cache_from_tables(tp, m, K, L, gen, prior, trans)));
    double big = tp.val(forward_loglik(
        tp, cache_from_tables(tp, m, K + 1, L, gen2, prior2, trans2)));
    CHECK(big >= small - 1e-12);
  }
}

TEST_CASE("likelihood gradient matches finite differences") {
  Rng rng(67);
  TinyCase tc;
  do {
    tc = make_tiny_case(rng, {4, 2, 2, 4, 3, 0.0});
  } while (tc.enc.m < 3);

  std::vector<Tensor> params;
  for (int i = 0; i < tc.mp.store.count(); ++i)
    params.push_back(tc.mp.store.value(i));

  auto eval = [&](const std::vector<Tensor>& p, std::vector<Tensor>* g) {
    ModelParams local = tc.mp;
    for (int i = 0; i < local.store.count(); ++i) local.store.value(i) = p[i];
    Tape tp;
    Bound b = bind(tp, local);
    Rng rr(0);
    SourceEncoding src = encode_source(tp, b, local, tc.enc, false, rr);
    DecoderChain chain =
        build_decoder_chain(tp, b, local, tc.enc, src, false, rr);
    SegmentScoreCache cache = precompute_segment_scores(
        tp, b, tc.enc, src, chain, tc.L,
        local.cfg.allow_null_self_transition);
    Var loss = tp.s_neg(forward_loglik(tp, cache));
    double v = tp.val(loss);
    if (g) {
      tp.backward(loss);
      tp.grads_into(*g);
    }
    return v;
  };
  ad::GradCheckResult r = ad::grad_check(params, eval, 1e-4);
  INFO("worst " << (r.worst_param >= 0 ? tc.mp.store.name(r.worst_param) : "-")
                << "[" << r.worst_elem << "] analytic " << r.analytic
                << " numeric " << r.numeric);
  CHECK(r.max_rel_err <= 1e-3);
}

TEST_CASE("full loss gradient matches finite differences") {
  Rng rng(71);
  TinyCase tc;
  do {
    tc = make_tiny_case(rng, {4, 2, 2, 4, 3, 0.0});
  } while (tc.enc.m < 3);

  std::vector<Tensor> params;
  for (int i = 0; i < tc.mp.store.count(); ++i)
    params.push_back(tc.mp.store.value(i));

  // gamma small enough that the margin term is active and differentiable.
  const double eta = 1.0, gamma = 1e-6;
  auto eval = [&](const std::vector<Tensor>& p, std::vector<Tensor>* g) {
    ModelParams local = tc.mp;
    for (int i = 0; i < local.store.count(); ++i) local.store.value(i) = p[i];
    Tape tp;
    Bound b = bind(tp, local);
    Rng rr(0);
    InstanceObjective obj =
        instance_objective(tp, b, local, tc.enc, eta, gamma, false, rr);
    double v = tp.val(obj.loss);
    if (g) {
      tp.backward(obj.loss);
      tp.grads_into(*g);
    }
    return v;
  };
  ad::GradCheckResult r = ad::grad_check(params, eval, 1e-4);
  INFO("worst " << (r.worst_param >= 0 ? tc.mp.store.name(r.worst_param) : "-")
                << "[" << r.worst_elem << "] analytic " << r.analytic
                << " numeric " << r.numeric);
  CHECK(r.max_rel_err <= 1e-3);
}

TEST_CASE("inside the band the margin term is inert") {
  Rng rng(73);
  TinyCase tc;
  do {
    tc = make_tiny_case(rng);
  } while (tc.enc.m < 2);

  auto built = build_case(tc);
  Tape& tp = built->tp;
  ForwardLattice lat = run_forward(tp, built->cache, true);
  double e = tp.val(lat.expected);

  // eta centered on E so |E - eta| = 0 < gamma; the saturated term is
  // exactly gamma.
  const double gamma = 7.25;
  Var loss = training_loss(tp, lat, std::max(1.0, e), gamma);
  Var nll = tp.s_neg(lat.loglik);
  Var reg = tp.s_max(tp.s_abs(tp.s_sub(lat.expected,
                                       tp.scalar(std::max(1.0, e)))),
                     tp.scalar(gamma));
  CHECK(tp.val(reg) == gamma);
  CHECK(tp.val(loss) == tp.val(nll) + gamma);

  std::vector<Tensor> g_loss = tc.mp.store.zero_grads();
  std::vector<Tensor> g_nll = tc.mp.store.zero_grads();
  tp.backward(loss);
  tp.grads_into(g_loss);
  // Fresh evaluation for the bare likelihood gradient.
  auto built2 = build_case(tc);
  Var nll2 = built2->tp.s_neg(forward_loglik(built2->tp, built2->cache));
  built2->tp.backward(nll2);
  built2->tp.grads_into(g_nll);
  for (size_t i = 0; i < g_loss.size(); ++i)
    CHECK(g_loss[i].v == g_nll[i].v);
}

TEST_CASE("margin arithmetic on a handmade lattice") {
  Tape tp;
  ForwardLattice lat;
  lat.m = 2;
  lat.loglik = tp.scalar(-2.0);
  lat.expected = tp.scalar(5.0);
  // E=5, eta=3, gamma=1: the margin contributes |5-3| = 2.
  CHECK(tp.val(training_loss(tp, lat, 3.0, 1.0)) == 4.0);
  // Inside the band the term saturates at gamma exactly.
  CHECK(tp.val(training_loss(tp, lat, 5.5, 1.0)) == 3.0);
  // Infinite gamma disables the term rather than producing an infinity.
  CHECK(tp.val(training_loss(tp, lat, 3.0,
                             std::numeric_limits<double>::infinity())) == 2.0);
}

TEST_CASE("printed margin and hinge margin share gradients") {
  const double gamma = 0.75;
  for (double x : {-2.0, -0.9, -0.2, 0.0, 0.4, 0.74, 0.76, 1.3, 5.0}) {
    Tape tp;
    Tensor leaf(1, 1);
    leaf.v[0] = x;
    Var vx = tp.param(leaf, 0);
    Var printed = tp.s_max(tp.s_abs(vx), tp.scalar(gamma));
    tp.backward(printed);
    std::vector<Tensor> sink(1, Tensor(1, 1));
    tp.grads_into(sink);
    double gp = sink[0].v[0];

    Tape tq;
    Var wx = tq.param(leaf, 0);
    Var hinge = tq.s_max(tq.s_sub(tq.s_abs(wx), tq.scalar(gamma)),
                         tq.scalar(0.0));
    tq.backward(hinge);
    std::vector<Tensor> sink2(1, Tensor(1, 1));
    tq.grads_into(sink2);
    double gh = sink2[0].v[0];

    INFO("x = " << x);
    if (std::abs(std::abs(x) - gamma) > 1e-12) {
      CHECK(gp == gh);
    } else {
      // Tie: the printed form takes the constant branch.
      CHECK(gp == 0.0);
    }
  }
}

TEST_CASE("lattice dump is tab-separated and complete") {
  Rng rng(79);
  TinyCase tc;
  do {
    tc = make_tiny_case(rng);
  } while (tc.enc.m < 3);
  auto built = build_case(tc);
  ForwardLattice lat = run_forward(built->tp, built->cache, true);
  std::ostringstream os;
  dump_lattice(os, built->tp, lat);
  std::istringstream is(os.str());
  std::string line;
  std::getline(is, line);
  CHECK(line.rfind("alpha\t", 0) == 0);
  int rows = 0;
  while (std::getline(is, line) && line.rfind("beta", 0) != 0) ++rows;
  CHECK(rows == tc.enc.m);
  rows = 0;
  while (std::getline(is, line)) ++rows;
  CHECK(rows == tc.enc.m);
}
