from typing import List, Optional

import numpy as np
import plotly.graph_objects as go

from src.world_cache.cache import WorldCache, CacheStats


class CacheVisualizer:
    def __init__(self, max_points: int = 50000, seed: int = 0):
        self.max_points = max_points
        self.seed = seed

    def _subsample(self, count: int) -> np.ndarray:
        if count <= self.max_points:
            return np.arange(count)
        rng = np.random.default_rng(self.seed)
        return np.sort(rng.choice(count, size=self.max_points, replace=False))

    def create_point_cloud_view(self, cache: WorldCache, output_path: str = "cache.html") -> str:
        """Interactive 3-D scatter of the cache, one trace per generation round"""
        keep = self._subsample(len(cache))
        positions = cache.positions[keep]
        colors = cache.colors[keep]
        rounds = cache.rounds[keep]

        figure = go.Figure()
        for round_index in np.unique(rounds):
            selected = rounds == round_index
            rgb = [f"rgb({r},{g},{b})" for r, g, b in colors[selected]]
            figure.add_trace(go.Scatter3d(
                x=positions[selected, 0], y=positions[selected, 1], z=positions[selected, 2],
                mode="markers",
                marker={"size": 1.5, "color": rgb},
                name=f"round {int(round_index)}",
            ))
        figure.update_layout(
            title=f"World cache ({len(cache)} points, {len(keep)} shown)",
            scene={"aspectmode": "data", "yaxis": {"autorange": "reversed"}},
            template="plotly_dark",
        )
        figure.write_html(output_path, include_plotlyjs="cdn")
        return output_path

    def create_summary_report(self,
                              stats: CacheStats,
                              output_path: str = "summary_report.html",
                              coverage: Optional[List[float]] = None) -> str:
        """Static HTML report with cache counts and optional per-frame coverage"""
        bbox = "empty"
        if stats.bbox_min is not None:
            bbox = ", ".join(f"[{lo:.3f}, {hi:.3f}]" for lo, hi in zip(stats.bbox_min, stats.bbox_max))
        mean_coverage = f"{np.mean(coverage):.3f}" if coverage else "n/a"

        html_content = f"""
        <!DOCTYPE html>
        <html>
        <head>
            <title>Coarse Video Summary Report</title>
            <style>
                body {{ font-family: Arial, sans-serif; margin: 40px; background-color: #f5f5f5; }}
                .container {{ max-width: 1200px; margin: 0 auto; background-color: white; padding: 30px; border-radius: 10px; box-shadow: 0 2px 10px rgba(0,0,0,0.1); }}
                h1 {{ color: #333; text-align: center; }}
                .stats {{ display: grid; grid-template-columns: repeat(auto-fit, minmax(200px, 1fr)); gap: 20px; margin: 30px 0; }}
                .stat-card {{ background-color: #f8f9fa; padding: 20px; border-radius: 8px; text-align: center; }}
                .stat-number {{ font-size: 2em; font-weight: bold; color: #007bff; }}
                .stat-label {{ color: #666; margin-top: 5px; }}
                .section {{ margin: 30px 0; }}
                .item-list {{ background-color: #f8f9fa; padding: 15px; border-radius: 5px; }}
                .item {{ margin: 10px 0; padding: 10px; background-color: white; border-radius: 5px; border-left: 4px solid #007bff; }}
                .low {{ border-left-color: #dc3545; }}
            </style>
        </head>
        <body>
            <div class="container">
                <h1>Coarse Video Summary Report</h1>

                <div class="stats">
                    <div class="stat-card">
                        <div class="stat-number">{stats.point_count}</div>
                        <div class="stat-label">Cache Points</div>
                    </div>
                    <div class="stat-card">
                        <div class="stat-number">{len(stats.per_round_counts)}</div>
                        <div class="stat-label">Rounds</div>
                    </div>
                    <div class="stat-card">
                        <div class="stat-number">{mean_coverage}</div>
                        <div class="stat-label">Mean Coverage</div>
                    </div>
                </div>

                <div class="section">
                    <h2>Bounding Box</h2>
                    <div class="item-list"><div class="item">{bbox}</div></div>
                </div>

                <div class="section">
                    <h2>Points per Round</h2>
                    <div class="item-list">
        """

        for round_index, count in stats.per_round_counts.items():
            html_content += f'<div class="item">round {round_index}: {count} points</div>'

        html_content += """
                    </div>
                </div>

                <div class="section">
                    <h2>Points per Source Frame</h2>
                    <div class="item-list">
        """

        for frame_index, count in stats.per_frame_counts.items():
            html_content += f'<div class="item">frame {frame_index}: {count} points</div>'

        html_content += """
                    </div>
                </div>
        """

        if coverage:
            html_content += """
                <div class="section">
                    <h2>Coverage per Target Frame</h2>
                    <div class="item-list">
            """
            for index, ratio in enumerate(coverage):
                css = "item low" if ratio < 0.5 else "item"
                html_content += f'<div class="{css}">frame {index:05d}: {ratio:.4f}</div>'
            html_content += """
                    </div>
                </div>
            """

        html_content += """
            </div>
        </body>
        </html>
        """

        with open(output_path, "w", encoding="utf-8") as f:
            f.write(html_content)

        return output_path
