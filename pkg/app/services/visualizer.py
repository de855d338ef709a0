import base64
import io
from pathlib import Path
from typing import Optional

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import pandas as pd  # noqa: E402

from app.core.logging_config import get_logger  # noqa: E402

logger = get_logger(__name__)


class HoleDecayPlotter:
    """
    Plot jumlah hole per simulasi terhadap burn-in k (empiris dan analitik)
    """

    def __init__(self, width: float = 6.0, height: float = 4.0):
        self.figsize = (width, height)

    def _figure(self, holes: pd.DataFrame, title: Optional[str] = None):
        fig, ax = plt.subplots(figsize=self.figsize)
        # nol tidak bisa digambar pada skala log
        empirical = holes[holes["holes"] > 0]
        ax.plot(empirical["k"], empirical["holes"], marker="o", markersize=3, linestyle="-", label="empiris")
        if "analytic_holes" in holes:
            ax.plot(holes["k"], holes["analytic_holes"], linestyle="--", label="analitik")
        ax.set_yscale("log")
        ax.set_xlabel("k")
        ax.set_ylabel("hole per simulasi")
        ax.set_title(title or "Peluruhan hole")
        ax.legend()
        fig.tight_layout()
        return fig

    def to_svg(self, holes: pd.DataFrame, title: Optional[str] = None) -> str:
        """
        SVG sebagai teks
        """
        try:
            fig = self._figure(holes, title)
            buffer = io.StringIO()
            # tanpa metadata tanggal dan dengan salt id tetap: output deterministik
            with plt.rc_context({"svg.hashsalt": "perfectsim"}):
                fig.savefig(buffer, format="svg", metadata={"Date": None})
            plt.close(fig)
            return buffer.getvalue()
        except Exception as e:
            logger.error(f"Error saat membuat plot hole: {str(e)}")
            raise

    def to_base64(self, holes: pd.DataFrame, title: Optional[str] = None) -> str:
        return base64.b64encode(self.to_svg(holes, title).encode("utf-8")).decode()

    def save(self, holes: pd.DataFrame, path: str, title: Optional[str] = None) -> Path:
        target = Path(path)
        target.parent.mkdir(parents=True, exist_ok=True)
        target.write_text(self.to_svg(holes, title), encoding="utf-8")
        logger.info(f"Plot hole ditulis ke {target}")
        return target
