"""Synthetic ratings generator in the 4-column MovieLens file format.

Produces a desk-scale interaction stream with skewed user/item popularity
and a latent-factor taste signal, so models that learn per-id embeddings
can beat trivial baselines.  Output is deterministic per seed.
"""

import numpy as np

__all__ = ["generate_ratings", "write_ratings_file"]


def generate_ratings(n_interactions=100_000, n_users=4000, n_items=2500,
                     latent_dim=8, popularity_exponent=1.1, seed=0):
    """Sample ``(user, item, rating, timestamp)`` rows.

    Users and items are drawn from Zipf-like popularity distributions;
    star ratings in 1..5 follow a noisy bilinear affinity of latent
    factors, so roughly half the ratings clear the 3.5 'liked' threshold.
    """
    rng = np.random.default_rng(seed)
    P = rng.standard_normal((n_users, latent_dim)) / np.sqrt(np.sqrt(latent_dim))
    Q = rng.standard_normal((n_items, latent_dim)) / np.sqrt(np.sqrt(latent_dim))

    def popularity(n):
        w = (np.arange(1, n + 1, dtype=float)) ** (-popularity_exponent)
        w /= w.sum()
        return rng.permutation(w)  # decouple popularity rank from id order

    user_w = popularity(n_users)
    item_w = popularity(n_items)
    users = rng.choice(n_users, size=n_interactions, p=user_w)
    items = rng.choice(n_items, size=n_interactions, p=item_w)
    affinity = np.einsum("ik,ik->i", P[users], Q[items])
    raw = 3.5 + 1.1 * affinity + 0.4 * rng.standard_normal(n_interactions)
    stars = np.clip(np.floor(raw + 0.5), 1, 5).astype(int)
    timestamps = np.arange(n_interactions)
    # ids are 1-based like common ratings dumps
    return list(zip((users + 1).tolist(), (items + 1).tolist(),
                    stars.tolist(), timestamps.tolist()))


def write_ratings_file(path, rows=None, **kwargs):
    """Write generated rows (or generate with ``kwargs``) to ``path``."""
    if rows is None:
        rows = generate_ratings(**kwargs)
    with open(path, "w", encoding="utf-8") as fh:
        for user, item, stars, ts in rows:
            fh.write(f"{user},{item},{float(stars)},{ts}\n")
    return path
