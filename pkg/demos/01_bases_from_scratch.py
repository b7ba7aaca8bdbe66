#!/usr/bin/env python3
"""Semantic bases from a head matrix, step by step.

A language model scores its vocabulary with logits = r @ W, where r is the
final hidden state and W is the d x v head matrix. The semantic basis of a
token is the representation whose logits are the least-squares fit of that
token's onehot -- i.e. row t of the pseudoinverse of W. This script builds a
small random head, computes the bases, checks the Penrose conditions, and
looks at how close a basis comes to lighting up only its own token.
"""

import numpy as np

import vds

rng = np.random.Generator(np.random.Philox(0))

d, v = 24, 80
W = rng.standard_normal((d, v))

# The pseudoinverse is computed from the SVD with a relative cutoff: singular
# values at or below rcond * sigma_max are treated as exact zeros.
B = vds.pseudoinverse(W)
print("head W:", W.shape, " bases B = pinv(W):", B.shape)

# Four Penrose conditions characterize the pseudoinverse uniquely.
residuals, ok = vds.check_penrose(W, B)
print("penrose residuals:", ", ".join(f"{r:.2e}" for r in residuals))
print("all four conditions hold:", ok)

# With v > d (the realistic LM regime) the onehot cannot be hit exactly:
# B @ W is the best rank-d approximation of the identity, an orthogonal
# projector. The basis's own logit is the diagonal entry; for this head it is
# the largest entry of its row for every single token.
P = B @ W
own_is_top = np.mean(np.argmax(np.abs(P), axis=1) == np.arange(v))
logits = P[17]
print("basis 17 -> own logit %.3f, largest off-target %.3f"
      % (logits[17], np.max(np.abs(np.delete(logits, 17)))))
print("fraction of bases whose top |logit| is their own token: %.2f" % own_is_top)

# Flip the shape to d >= v and the fit becomes exact: every basis produces
# logit 1 on its token and 0 elsewhere, to machine precision.
W_tall = rng.standard_normal((80, 24))
B_tall = vds.pseudoinverse(W_tall)
print("d >= v: max |B @ W - I| = %.2e" % np.abs(B_tall @ W_tall - np.eye(24)).max())

# Rank deficiency is where the cutoff matters. Duplicate a column block so
# the head loses rank, then look at the recovered logits: the basis of a
# duplicated token splits its unit of logit across both copies, which is the
# least-squares compromise.
W_def = W.copy()
W_def[:, 40:60] = W_def[:, 0:20]
B_def = vds.pseudoinverse(W_def)
_, ok_def = vds.check_penrose(W_def, B_def)
print("rank-deficient head still satisfies Penrose:", ok_def)
dup = B_def[0] @ W_def
print("duplicated-column basis splits its logit: token0=%.3f token40=%.3f"
      % (dup[0], dup[40]))

# head_bases wraps the same computation with provenance (source, rcond) and
# class_basis averages token bases when a class is verbalized by several
# tokens.
bases = vds.head_bases(W)
assert bases.bases.shape == (v, d) and bases.source == "head_pinv"
verbalizer = {"yes": [3, 9], "no": [11]}
cb = vds.class_basis(bases, verbalizer, "yes")
assert np.allclose(cb, bases.bases[[3, 9]].mean(axis=0))
print("class basis for 'yes' = mean of token bases 3 and 9: ok")
