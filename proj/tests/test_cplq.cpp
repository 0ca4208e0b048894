#include "doctest.h"

#include "oracles.hpp"
#include "psmooth/cplq.hpp"

using namespace psmooth;
using oracle::vec;

TEST_CASE("cplq checker on the one-dimensional examples") {
  const CplqReport sq = cplq_check(cplq_half_max_squared(), vec({0}));
  CHECK_FALSE(sq.partly_smooth);
  CHECK(sq.active.size() == 2);
  // Both cells have normal spans equal to N_M = R; the ri intersection is empty.
  CHECK(sq.cond1_per_piece == std::vector<bool>{true, true});
  CHECK_FALSE(sq.cond2_witness.has_value());

  const CplqReport ab = cplq_check(cplq_abs(), vec({0}));
  CHECK(ab.partly_smooth);
  REQUIRE(ab.cond2_witness.has_value());
  CHECK(std::abs((*ab.cond2_witness)(0)) < 1.0);

  const CplqReport ab2 = cplq_check(cplq_abs(), vec({2}));
  CHECK(ab2.partly_smooth);
  CHECK(ab2.active.size() == 1);
  CHECK(ab2.normal_space.cols() == 0);

  const CplqReport ind = cplq_check(cplq_nonneg_indicator(), vec({0}));
  CHECK(ind.partly_smooth);
  CHECK_THROWS_AS(cplq_check(cplq_nonneg_indicator(), vec({-1})), Error);
}

TEST_CASE("cplq subdifferential of |x| and max(x,0)^2/2") {
  const SubdifferentialRep s = cplq_subdifferential(cplq_abs(), vec({0}));
  CHECK(contains(s, vec({0.9})));
  CHECK(contains(s, vec({-1})));
  CHECK_FALSE(contains(s, vec({1.1})));
  const SubdifferentialRep t = cplq_subdifferential(cplq_half_max_squared(), vec({0}));
  CHECK(parallel_basis(t).cols() == 0);
  CHECK(contains(t, vec({0})));
}

TEST_CASE("cplq checker agrees with brute force on random instances") {
  RandomStream rng(2024, 0);
  int ps = 0, nps = 0;
  for (int trial = 0; trial < 60; ++trial) {
    rng.seek(static_cast<std::uint32_t>(trial));
    const oracle::CplqInstance inst = oracle::random_cplq(rng, trial);
    CAPTURE(trial);
    const CplqSpotCheck spot = spot_check_cplq(inst.f, 9, 200, 2.0);
    CHECK(spot.well_defined);
    CHECK(spot.midpoint_convex);
    const CplqReport rep = cplq_check(inst.f, inst.x);
    const oracle::CplqBrute brute = oracle::cplq_brute(inst.f, inst.x);
    CHECK(rep.cond1_per_piece == brute.cond1);
    CHECK(rep.cond2_witness.has_value() == brute.cond2);
    CHECK(rep.partly_smooth == brute.partly_smooth);
    (rep.partly_smooth ? ps : nps)++;
  }
  // The generator should exercise both outcomes.
  CHECK(ps > 5);
  CHECK(nps > 5);
}
