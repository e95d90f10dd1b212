"""Figure renderer for attrsearch result bundles."""

from .bundle import BundleError, PlotBundle, load_bundle
from .render import render_bundle

__version__ = "0.1.0"
