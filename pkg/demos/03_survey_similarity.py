"""From raw yes/no survey responses to a fitted multilayer network.

Builds agreement-ratio similarity layers (Fisher-transformed) from two
question batteries and clusters the respondents.  Three planted response
styles differ in their yes-rates, with a different ordering on each
battery; the fit recovers the styles and labels one block as the
globally distributed ambient component.
"""

import numpy as np

import sbanm
from sbanm.rng import substream

rng = substream(44, "responses")
sizes = [16, 18, 16]
groups = np.repeat([0, 1, 2], sizes)
n = groups.size
# per-style yes-rates; the orderings differ across batteries
batteries = {
    "battery_a": ([0.85, 0.50, 0.15], 40),
    "battery_b": ([0.50, 0.85, 0.15], 30),
}

layers = []
for name, (rates, n_items) in batteries.items():
    prob = np.array(rates)[groups][:, None]
    answers = (rng.uniform(size=(n, n_items)) < prob).astype(float)
    layers.append((name, answers))
responses = sbanm.ResponseMatrix(
    n_subjects=n, layers=layers, subjects=[f"s{i:02d}" for i in range(n)]
)

net = sbanm.build_similarity_network(responses)
print(f"similarity network: n={net.n}, K={net.K} layers "
      f"({', '.join(batteries)})")
print("edge-weight range per layer:",
      np.round(net.weights.min(axis=0), 2), "to",
      np.round(net.weights.max(axis=0), 2))

result = sbanm.fit(net, sbanm.FitConfig(Q=3, seed=44))
print(f"\nfit: converged={result.converged}, "
      f"ambient block index = {result.params.noise_block}")
print("fitted block sizes:", np.bincount(result.hard_membership, minlength=3).tolist())
print("agreement with planted styles: "
      f"ARI {sbanm.ari(groups, result.hard_membership):.3f}")

print("\nper-block summaries (mean Fisher agreement per battery):")
for q, b in enumerate(result.params.blocks):
    tag = "ambient" if q == result.params.noise_block else "signal "
    members = np.bincount(groups[result.hard_membership == q], minlength=3)
    print(f"  block {q} ({tag}): mu {np.round(b.mu, 2)}, rho {b.rho:.2f}, "
          f"planted-style composition {members.tolist()}")
print("\nthe ambient block gathers the style whose internal agreement level "
      "is closest to the between-style level")
