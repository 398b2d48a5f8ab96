"""SHENet: latent-space single-horizon prediction of post-therapy OCT B-scans."""

__version__ = "0.1.0"
