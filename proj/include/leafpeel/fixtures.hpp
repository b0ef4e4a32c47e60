#pragma once

#include "leafpeel/metric_tree.hpp"

namespace leafpeel::fixtures {

/// Star with three boundary edges of the given lengths; root is the third leaf.
MetricTree three_star(double l1, double l2, double l3, const PotentialProfile& q = PotentialProfile::zero());

/// Two internal vertices va, vb. Leaves g1, g2 hang off va; g3 and the root off vb.
/// Lengths 1, 1.5 (va leaves), 1 (va-vb), 1.2, 1.3 (vb leaves).
MetricTree two_level(bool with_potential);

/// Three leaves on va, then va-w-root. Peels to a two-edge path.
MetricTree broom();

/// Spine s1-s2-s3; s1 carries g1, g2; s2 carries g3; s3 carries g4 and the root.
MetricTree caterpillar();

}  // namespace leafpeel::fixtures
