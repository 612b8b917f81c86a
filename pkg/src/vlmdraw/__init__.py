"""vlmdraw: a training-free harness that turns chat vision-language
models into image annotators producing editable vector overlays."""

__version__ = "0.1.0"
