"""
Scoring a generated taxonomy
============================

Best-match precision and recall from a contingency matrix, top_sim from
name embeddings, and the Sankey export.
"""

import tempfile

from satdtax import Gateway, MockProvider, build_taxonomy, generate_explanations, load_dataset
from satdtax.corpus import load_human_reference
from satdtax.evaluate import ContingencyMatrix, HashEmbedder, best_match_metrics, evaluate_run
from satdtax.report import sankey_export
from satdtax.simulate import SimulatedAnalyst, make_synthetic_dataset

# a hand-sized matrix first: rows are human categories, columns generated ones
C = ContingencyMatrix.from_counts([[3, 1], [0, 2]])
for score in best_match_metrics(C).per_category:
    print(score.h_name, score.best_match, score.precision, score.recall, round(float(score.f1), 3))

manifest = make_synthetic_dataset(tempfile.mkdtemp(), n=88)
dataset = load_dataset(manifest)
gateway = Gateway(MockProvider(responder=SimulatedAnalyst()))
taxonomy = build_taxonomy(generate_explanations(dataset, gateway), gateway)
reference = load_human_reference(manifest)

# HashEmbedder only matches identical names; use get_embedder("minilm") for real runs
for level in ("main", "sub"):
    report, C = evaluate_run(taxonomy, reference, level, HashEmbedder(), "synthetic", "demo")
    print(level, {k: round(v, 3) for k, v in report.means.items()}, "granularity", report.granularity)

sankey = sankey_export(C)
print(len(sankey["links"]), "flows carrying", sum(l["weight"] for l in sankey["links"]), "comments")
