"""Deep survival-clustering model.

A VAE whose latent space carries a Gaussian-mixture prior, with one
linear Weibull survival head per mixture component. Training maximizes a
Monte Carlo estimate of the evidence lower bound; component
responsibilities are recomputed from the current parameters every step
and treated as fixed weights inside that step's gradient.

The objective decomposes into five named terms: reconstruction, survival,
clustering, prior, and variational entropy. ``elbo_value`` evaluates the
objective for frozen noise and responsibilities (the finite-difference
oracle path); ``elbo_grads`` additionally returns analytic gradients.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field, replace

import numpy as np

from .dist import (
    log_gaussian_diag,
    log_sum_exp,
    log_weibull_censored,
    softmax,
    softplus,
    softplus_grad,
    weibull_median,
)
from .errors import ConfigError, DomainError, ShapeError, TrainingError
from .nnet import AdamState, DenseNet, adam_step, init_dense_net, net_backward, net_forward

LOGVAR_MIN, LOGVAR_MAX = -10.0, 10.0
SCALE_FLOOR = 1e-8


@dataclass
class TrainConfig:
    """Everything needed to reproduce one training run."""

    latent_dim: int = 16
    num_clusters: int = 3
    weibull_shape: float = 1.0
    batch_size: int = 256
    learning_rate: float = 1e-3
    epochs: int = 1000
    pretrain_epochs: int = 0
    mc_samples: int = 1
    recon_loss: str = "mse"  # "mse" | "bce"
    survival_weight: float = 1.0  # 0 disables the survival term (unsupervised ablation)
    gmm_prior: bool = True  # False: plain VAE prior + single survival head
    seed: int = 42
    enc_hidden: tuple = (128, 128)
    dec_hidden: tuple = (128, 128)

    def validate(self):
        if self.latent_dim < 1 or self.num_clusters < 1:
            raise ConfigError("latent_dim and num_clusters must be >= 1")
        if self.mc_samples < 1 or self.batch_size < 1:
            raise ConfigError("mc_samples and batch_size must be >= 1")
        if self.recon_loss not in ("mse", "bce"):
            raise ConfigError(f"unknown recon_loss {self.recon_loss!r}")
        if self.weibull_shape <= 0:
            raise ConfigError("weibull_shape must be positive")


@dataclass
class ModelParams:
    """All trainable quantities.

    The encoder maps D features to 2J outputs (latent mean, latent
    log-variance); the decoder maps J latents back to D outputs. Mixture
    components and survival heads are indexed consistently.
    """

    encoder: DenseNet
    decoder: DenseNet
    mixture_logits: np.ndarray  # (K,)
    means: np.ndarray  # (K, J)
    log_vars: np.ndarray  # (K, J)
    betas: np.ndarray  # (K, J+1); column 0 is the bias
    shape: float
    gmm_prior: bool = True

    @property
    def latent_dim(self):
        return self.means.shape[1]

    @property
    def num_clusters(self):
        return self.means.shape[0]

    @property
    def input_dim(self):
        return self.encoder.input_dim

    def copy(self):
        return ModelParams(
            self.encoder.copy(),
            self.decoder.copy(),
            self.mixture_logits.copy(),
            self.means.copy(),
            self.log_vars.copy(),
            self.betas.copy(),
            self.shape,
            self.gmm_prior,
        )

    def flat(self, trainable_only=True):
        """Named view of the parameter arrays (shared memory, not copies)."""
        out = {}
        for i, (w, b) in enumerate(zip(self.encoder.weights, self.encoder.biases)):
            out[f"enc.W{i}"] = w
            out[f"enc.b{i}"] = b
        for i, (w, b) in enumerate(zip(self.decoder.weights, self.decoder.biases)):
            out[f"dec.W{i}"] = w
            out[f"dec.b{i}"] = b
        out["surv.betas"] = self.betas
        if self.gmm_prior or not trainable_only:
            out["mix.logits"] = self.mixture_logits
            out["mix.means"] = self.means
            out["mix.log_vars"] = self.log_vars
        return out


def init_params(input_dim, config, rng):
    config.validate()
    j = config.latent_dim
    k = config.num_clusters if config.gmm_prior else 1
    enc_sizes = [input_dim, *config.enc_hidden, 2 * j]
    enc_acts = ["relu"] * len(config.enc_hidden) + ["identity"]
    dec_sizes = [j, *config.dec_hidden, input_dim]
    dec_acts = ["relu"] * len(config.dec_hidden) + ["identity"]
    encoder = init_dense_net(enc_sizes, enc_acts, rng)
    decoder = init_dense_net(dec_sizes, dec_acts, rng)
    if config.gmm_prior:
        means = rng.standard_normal((k, j))
    else:
        means = np.zeros((k, j))
    return ModelParams(
        encoder=encoder,
        decoder=decoder,
        mixture_logits=np.zeros(k),
        means=means,
        log_vars=np.zeros((k, j)),
        betas=0.01 * rng.standard_normal((k, j + 1)),
        shape=config.weibull_shape,
        gmm_prior=config.gmm_prior,
    )


def encode(params, X):
    """Latent mean and clamped log-variance for a batch."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    out, _ = net_forward(params.encoder, X)
    j = params.latent_dim
    mu = out[:, :j]
    log_var = np.clip(out[:, j:], LOGVAR_MIN, LOGVAR_MAX)
    return mu, log_var


def reparameterize(mu, log_var, rng, n_samples=1):
    """Draw z = mu + sigma * eps; returns (z, eps) with shape (L, N, J)."""
    mu = np.asarray(mu, dtype=float)
    log_var = np.asarray(log_var, dtype=float)
    eps = rng.standard_normal((n_samples, *mu.shape))
    z = mu[None] + np.exp(0.5 * log_var)[None] * eps
    return z, eps


def weibull_scales(params, Z):
    """Per-component Weibull scales softplus([1;z]·beta_c) for a batch of z."""
    Z = np.atleast_2d(np.asarray(Z, dtype=float))
    pre = Z @ params.betas[:, 1:].T + params.betas[:, 0]
    return np.maximum(softplus(pre), SCALE_FLOOR)


def _component_log_joint(params, Z, t=None, event=None, survival_weight=1.0):
    """Unnormalized log p(c, z[, t]) per row and component: (N, K)."""
    log_pi = params.mixture_logits - log_sum_exp(params.mixture_logits)
    log_pz = log_gaussian_diag(
        Z[:, None, :], params.means[None], np.exp(params.log_vars)[None]
    )
    logits = log_pz + log_pi[None, :]
    if t is not None and survival_weight != 0.0:
        lam = weibull_scales(params, Z)
        log_pt = log_weibull_censored(
            np.asarray(t, dtype=float)[:, None],
            np.asarray(event, dtype=float)[:, None],
            lam,
            params.shape,
        )
        logits = logits + survival_weight * log_pt
    return logits


def _normalize_log_posterior(logits):
    if not np.all(np.isfinite(np.max(logits, axis=-1))):
        raise TrainingError(
            "degenerate cluster posterior: all component log-scores are -inf "
            f"(min={np.min(logits)}, max={np.max(logits)})"
        )
    return softmax(logits, axis=-1)


def cluster_posterior(params, Z, t, event):
    """p(c | z, t) row per input, computed in the log domain."""
    Z = np.atleast_2d(np.asarray(Z, dtype=float))
    logits = _component_log_joint(params, Z, t, event)
    return _normalize_log_posterior(logits)


def cluster_posterior_prior_only(params, Z):
    """p(c | z) when the survival time is unavailable."""
    Z = np.atleast_2d(np.asarray(Z, dtype=float))
    logits = _component_log_joint(params, Z)
    return _normalize_log_posterior(logits)


@dataclass
class ElboTerms:
    reconstruction: float
    survival: float
    clustering: float
    prior: float
    entropy: float

    @property
    def total(self):
        return (
            self.reconstruction
            + self.survival
            + self.clustering
            + self.prior
            + self.entropy
        )

    def check_finite(self):
        for name in ("reconstruction", "survival", "clustering", "prior", "entropy"):
            if not np.isfinite(getattr(self, name)):
                raise TrainingError(f"non-finite ELBO term: {name}")


def _recon_log_lik(dec_out, X, recon_loss):
    """Per-row reconstruction log-likelihood and its gradient w.r.t. the
    decoder output. For bce the decoder output is a logit."""
    if recon_loss == "mse":
        # Unit-variance Gaussian decoder.
        ll = -0.5 * np.sum((X - dec_out) ** 2 + np.log(2.0 * np.pi), axis=1)
        grad = X - dec_out
    else:
        # Bernoulli decoder on logits: x*a - softplus(a).
        ll = np.sum(X * dec_out - softplus(dec_out), axis=1)
        grad = X - softplus_grad(dec_out)
    return ll, grad


def _forward_pass(params, X, t, event, eps, config, resp=None):
    """Shared forward computation for ELBO value and gradients.

    eps has shape (L, B, J). resp, when given, freezes the component
    responsibilities (used by the gradient oracle); otherwise they are
    recomputed from the current parameters.
    """
    B = X.shape[0]
    L = eps.shape[0]
    enc_out, enc_stack = net_forward(params.encoder, X)
    j = params.latent_dim
    mu = enc_out[:, :j]
    log_var_raw = enc_out[:, j:]
    log_var = np.clip(log_var_raw, LOGVAR_MIN, LOGVAR_MAX)
    sigma = np.exp(0.5 * log_var)
    z = mu[None] + sigma[None] * eps  # (L, B, J)
    Z = z.reshape(L * B, j)
    Xrep = np.tile(X, (L, 1))
    trep = np.tile(np.asarray(t, dtype=float), L)
    erep = np.tile(np.asarray(event, dtype=float), L)

    dec_out, dec_stack = net_forward(params.decoder, Z)
    recon_ll, recon_grad = _recon_log_lik(dec_out, Xrep, config.recon_loss)

    lam_pre = Z @ params.betas[:, 1:].T + params.betas[:, 0]
    lam = np.maximum(softplus(lam_pre), SCALE_FLOOR)
    log_pt = log_weibull_censored(trep[:, None], erep[:, None], lam, params.shape)

    var_c = np.exp(params.log_vars)
    log_pz = log_gaussian_diag(Z[:, None, :], params.means[None], var_c[None])
    log_pi = params.mixture_logits - log_sum_exp(params.mixture_logits)

    if resp is None:
        logits = log_pz + log_pi[None, :]
        if config.survival_weight != 0.0:
            logits = logits + config.survival_weight * log_pt
        resp = _normalize_log_posterior(logits)

    return {
        "B": B,
        "L": L,
        "enc_stack": enc_stack,
        "dec_stack": dec_stack,
        "mu": mu,
        "log_var_raw": log_var_raw,
        "log_var": log_var,
        "sigma": sigma,
        "Z": Z,
        "recon_ll": recon_ll,
        "recon_grad": recon_grad,
        "lam_pre": lam_pre,
        "lam": lam,
        "log_pt": log_pt,
        "log_pz": log_pz,
        "log_pi": log_pi,
        "resp": resp,
        "trep": trep,
        "erep": erep,
        "var_c": var_c,
    }


def _terms_from_forward(f, config):
    B, L = f["B"], f["L"]
    resp = f["resp"]
    n = L * B
    recon = float(f["recon_ll"].sum() / n)
    survival = float(config.survival_weight * (resp * f["log_pt"]).sum() / n)
    clustering = float((resp * f["log_pz"]).sum() / n)
    prior = float((resp * f["log_pi"][None, :]).sum() / n)
    j = f["mu"].shape[1]
    gauss_ent = 0.5 * np.sum(np.log(2.0 * np.pi) + 1.0 + f["log_var"]) / B
    with np.errstate(divide="ignore", invalid="ignore"):
        cat_ent = -np.where(resp > 0.0, resp * np.log(resp), 0.0).sum() / n
    entropy = float(gauss_ent + cat_ent)
    return ElboTerms(recon, survival, clustering, prior, entropy)


def elbo_value(params, X, t, event, eps, config, resp=None):
    """Objective value for frozen noise (and optionally frozen
    responsibilities). This is the path finite differences exercise."""
    f = _forward_pass(params, X, t, event, eps, config, resp=resp)
    return _terms_from_forward(f, config)


def elbo_terms(params, X, t, event, config, rng):
    """Monte Carlo ELBO terms for a batch, sampling fresh noise."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    if X.shape[0] == 0:
        raise ShapeError("empty batch")
    mu, log_var = encode(params, X)
    _, eps = reparameterize(mu, log_var, rng, config.mc_samples)
    terms = elbo_value(params, X, t, event, eps, config)
    terms.check_finite()
    return terms


def elbo_grads(params, X, t, event, eps, config, resp=None):
    """ELBO terms plus analytic gradients of the total w.r.t. every
    trainable parameter. Responsibilities are treated as constants."""
    f = _forward_pass(params, X, t, event, eps, config, resp=resp)
    terms = _terms_from_forward(f, config)
    B, L = f["B"], f["L"]
    n = L * B
    resp = f["resp"]
    Z = f["Z"]
    j = params.latent_dim
    grads = {}

    # Decoder, via the reconstruction term.
    dec_w, dec_b, dZ = net_backward(params.decoder, f["dec_stack"], f["recon_grad"] / n)
    for i in range(len(dec_w)):
        grads[f"dec.W{i}"] = dec_w[i]
        grads[f"dec.b{i}"] = dec_b[i]

    # Survival heads. d log p(t|z,c) / d lambda = (k/lam)((t/lam)^k - delta).
    k = params.shape
    ratio_k = np.exp(k * (np.log(f["trep"])[:, None] - np.log(f["lam"])))
    dlam = (k / f["lam"]) * (ratio_k - f["erep"][:, None])
    active = (f["lam"] > SCALE_FLOOR).astype(float)
    dpre = config.survival_weight * resp * dlam * softplus_grad(f["lam_pre"]) * active / n
    grads["surv.betas"] = np.concatenate(
        [dpre.sum(axis=0)[:, None], dpre.T @ Z], axis=1
    )
    dZ = dZ + dpre @ params.betas[:, 1:]

    # Mixture parameters, via clustering and prior terms.
    diff = Z[:, None, :] - params.means[None]  # (n, K, J)
    w = resp[:, :, None] / f["var_c"][None]
    if params.gmm_prior:
        grads["mix.means"] = (w * diff).sum(axis=0) / n
        grads["mix.log_vars"] = (
            resp[:, :, None] * (-0.5 + diff**2 / (2.0 * f["var_c"][None]))
        ).sum(axis=0) / n
        pi = np.exp(f["log_pi"])
        grads["mix.logits"] = (resp - pi[None, :]).sum(axis=0) / n
    dZ = dZ - (w * diff).sum(axis=1) / n

    # Reparameterization: z = mu + sigma * eps.
    dZ = dZ.reshape(L, B, j)
    dmu = dZ.sum(axis=0)
    dlogvar = (dZ * eps).sum(axis=0) * 0.5 * f["sigma"]
    # Entropy term contributes 1/(2B) per log-variance coordinate.
    dlogvar = dlogvar + 0.5 / B
    clamp_mask = (f["log_var_raw"] > LOGVAR_MIN) & (f["log_var_raw"] < LOGVAR_MAX)
    upstream_enc = np.concatenate([dmu, dlogvar * clamp_mask], axis=1)
    enc_w, enc_b, _ = net_backward(params.encoder, f["enc_stack"], upstream_enc)
    for i in range(len(enc_w)):
        grads[f"enc.W{i}"] = enc_w[i]
        grads[f"enc.b{i}"] = enc_b[i]
    return terms, grads


def _recon_only_grads(params, X, eps, config):
    """Autoencoder gradients (reconstruction term only), for pretraining."""
    f = _forward_pass(
        params,
        X,
        np.ones(X.shape[0]),
        np.ones(X.shape[0]),
        eps,
        config,
        resp=np.full((eps.shape[0] * X.shape[0], params.num_clusters), np.nan),
    )
    B, L = f["B"], f["L"]
    n = L * B
    grads = {}
    dec_w, dec_b, dZ = net_backward(params.decoder, f["dec_stack"], f["recon_grad"] / n)
    for i in range(len(dec_w)):
        grads[f"dec.W{i}"] = dec_w[i]
        grads[f"dec.b{i}"] = dec_b[i]
    dZ = dZ.reshape(L, B, params.latent_dim)
    dmu = dZ.sum(axis=0)
    dlogvar = (dZ * eps).sum(axis=0) * 0.5 * f["sigma"]
    clamp_mask = (f["log_var_raw"] > LOGVAR_MIN) & (f["log_var_raw"] < LOGVAR_MAX)
    upstream_enc = np.concatenate([dmu, dlogvar * clamp_mask], axis=1)
    enc_w, enc_b, _ = net_backward(params.encoder, f["enc_stack"], upstream_enc)
    for i in range(len(enc_w)):
        grads[f"enc.W{i}"] = enc_w[i]
        grads[f"enc.b{i}"] = enc_b[i]
    recon = float(f["recon_ll"].sum() / n)
    return recon, grads


def pretrain_init(params, X, config, rng):
    """Initialize the mixture parameters.

    With pretrain_epochs > 0: train encoder/decoder on the reconstruction
    objective, then fit a diagonal Gaussian mixture on the encoded means
    and copy its statistics into the prior. With 0 epochs the mixture is
    left at its random initialization (uniform weights).
    """
    if config.pretrain_epochs <= 0 or not params.gmm_prior:
        return params
    X = np.asarray(X, dtype=float)
    n = X.shape[0]
    net_params = {
        k: v for k, v in params.flat().items() if k.startswith(("enc.", "dec."))
    }
    state = AdamState()
    for _ in range(config.pretrain_epochs):
        order = rng.permutation(n)
        for start in range(0, n, config.batch_size):
            idx = order[start : start + config.batch_size]
            Xb = X[idx]
            mu, log_var = encode(params, Xb)
            _, eps = reparameterize(mu, log_var, rng, config.mc_samples)
            _, grads = _recon_only_grads(params, Xb, eps, config)
            neg = {k: -g for k, g in grads.items()}
            adam_step(net_params, neg, state, config.learning_rate)
    mu, _ = encode(params, X)
    from .baselines import gmm_em_fit, kmeans_assign, kmeans_fit

    try:
        gmm, _ = gmm_em_fit(mu, params.num_clusters, seed=int(rng.integers(2**31)))
        weights, means, variances = gmm.weights, gmm.means, gmm.variances
    except Exception as exc:  # pragma: no cover - defensive fallback
        warnings.warn(f"mixture fit failed ({exc}); falling back to k-means statistics")
        km = kmeans_fit(mu, params.num_clusters, seed=int(rng.integers(2**31)))
        labels = kmeans_assign(km, mu)
        means = km.centers
        weights = np.bincount(labels, minlength=params.num_clusters) / len(labels)
        variances = np.stack(
            [
                mu[labels == c].var(axis=0) + 1e-6
                if np.any(labels == c)
                else np.ones(params.latent_dim)
                for c in range(params.num_clusters)
            ]
        )
    params.mixture_logits[:] = np.log(np.maximum(weights, 1e-12))
    params.means[:] = means
    params.log_vars[:] = np.log(np.maximum(variances, 1e-6))
    return params


def fit(data, config, callback=None):
    """Train on a preprocessed dataset; returns (params, per-epoch trace).

    data must expose .features, .times, .events. The trace holds the mean
    batch objective per epoch.
    """
    config.validate()
    rng = np.random.default_rng(config.seed)
    X = np.asarray(data.features, dtype=float)
    t = np.asarray(data.times, dtype=float)
    event = np.asarray(data.events, dtype=float)
    n = X.shape[0]
    params = init_params(X.shape[1], config, rng)
    params = pretrain_init(params, X, config, rng)
    flat = params.flat()
    state = AdamState()
    trace = []
    for epoch in range(config.epochs):
        order = rng.permutation(n)
        epoch_vals = []
        for bstart in range(0, n, config.batch_size):
            idx = order[bstart : bstart + config.batch_size]
            Xb, tb, eb = X[idx], t[idx], event[idx]
            mu, log_var = encode(params, Xb)
            _, eps = reparameterize(mu, log_var, rng, config.mc_samples)
            try:
                terms, grads = elbo_grads(params, Xb, tb, eb, eps, config)
                terms.check_finite()
                neg = {k: -grads[k] for k in flat}
                adam_step(flat, neg, state, config.learning_rate)
            except (TrainingError, DomainError) as exc:
                raise TrainingError(
                    f"epoch {epoch}, batch {bstart // config.batch_size}: {exc}"
                ) from exc
            epoch_vals.append(terms.total)
        trace.append(float(np.mean(epoch_vals)))
        if callback is not None:
            callback(epoch, trace[-1])
    return params, trace


@dataclass
class Prediction:
    labels: np.ndarray  # (N,)
    posterior: np.ndarray  # (N, K)
    latent: np.ndarray  # (N, J)
    median_time: np.ndarray  # (N,)


def predict(params, X, t=None, event=None):
    """Cluster labels, posterior, latent means and predicted median times.

    Uses z = mu_theta (no sampling). When (t, event) are given the label
    posterior conditions on them; the predicted time always uses the
    time-free posterior so held-out prediction never peeks at t.
    """
    X = np.atleast_2d(np.asarray(X, dtype=float))
    mu, _ = encode(params, X)
    if t is not None:
        post = cluster_posterior(params, mu, t, event)
    else:
        post = cluster_posterior_prior_only(params, mu)
    prior_post = post if t is None else cluster_posterior_prior_only(params, mu)
    lam = weibull_scales(params, mu)
    medians = weibull_median(lam, params.shape)
    t_hat = (prior_post * medians).sum(axis=1)
    labels = np.argmax(post, axis=1)  # argmax breaks ties toward lower index
    return Prediction(labels, post, mu, t_hat)
