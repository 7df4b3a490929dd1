"""HTTP classifier backend that fine-tunes a small pre-trained
multilingual text encoder behind the pipeline's wire protocol."""

__version__ = "0.1.0"
