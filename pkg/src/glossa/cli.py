"""The `glossa` command line: corpus inspection, tagger training,
cross-lingual projection, the experiment grid, active learning,
cross-validation, the annotation service, and the synthetic benchmark
generator. Report commands write TSV + JSON tables and render a PNG
figure next to them.
"""

from __future__ import annotations

import json
import sys
from pathlib import Path

import click

from . import reports
from .corpus import (
    Corpus, load_corpus, load_elisions, load_parallel_corpus, save_corpus,
    save_narrative, corpus_stats, validate_corpus,
)
from .crf import train_crf, CrfModel
from .dictionary import TagDictionary
from .features import FeatureTemplateConfig
from .gdb import GdbConfig, train_gdb
from .harness import (
    DataCondition, ExperimentData, OracleAnnotator, cross_validate,
    run_active_learning, run_grid,
)
from .hmm import HmmModel
from .neural import NeuralConfig, NeuralModel, train_neural
from .projection import ProjectionFilter, build_projected_dictionary
from .alignment import load_external_links, save_links
from .synthetic import SyntheticConfig, generate
from .taggers import TrainData, make_tagger
from .tags import TagsetMapping


@click.group()
def main() -> None:
    """Workbench for bootstrapping POS taggers for low-resource languages."""


# -- corpus ----------------------------------------------------------------------

@main.group()
def corpus() -> None:
    """Corpus inspection and validation."""


@corpus.command("stats")
@click.argument("directory", type=click.Path(exists=True, file_okay=False))
@click.option("--suffix", default=".grk", show_default=True)
@click.option("--as-json", is_flag=True, help="emit machine-readable JSON")
def corpus_stats_cmd(directory, suffix, as_json) -> None:
    """Stories, sentences, types and tokens for one corpus side."""
    report = corpus_stats(load_corpus(directory, suffix=suffix))
    if as_json:
        click.echo(json.dumps(report.as_dict(), indent=2))
    else:
        for key, value in report.as_dict().items():
            click.echo(f"{key:>20}: {value}")


@corpus.command("validate")
@click.argument("directory", type=click.Path(exists=True, file_okay=False))
@click.option("--suffix", default=".grk", show_default=True)
def corpus_validate_cmd(directory, suffix) -> None:
    """Exit 0 iff every invariant holds."""
    problems = validate_corpus(load_corpus(directory, suffix=suffix))
    for problem in problems:
        click.echo(problem, err=True)
    if problems:
        sys.exit(1)
    click.echo("ok")


# -- training -----------------------------------------------------------------------

@main.group()
def train() -> None:
    """Train a tagger."""


def _load_dictionary(path) -> TagDictionary | None:
    return TagDictionary.load_tsv(path) if path else None


@train.command("crf")
@click.option("--train", "train_dir", required=True, type=click.Path(exists=True))
@click.option("--out", required=True, type=click.Path())
@click.option("--profile", type=click.Choice(["basic", "extended"]), default="extended",
              show_default=True)
@click.option("--dict", "dict_tsv", type=click.Path(exists=True),
              help="type-supervision dictionary TSV")
@click.option("--l2", default=0.1, show_default=True)
@click.option("--max-iters", default=200, show_default=True)
def train_crf_cmd(train_dir, out, profile, dict_tsv, l2, max_iters) -> None:
    data = [s for n in load_corpus(train_dir) for s in n.active_sentences()]
    cfg = (FeatureTemplateConfig.extended() if profile == "extended"
           else FeatureTemplateConfig.basic())
    model, log = train_crf(data, sup=_load_dictionary(dict_tsv), cfg=cfg,
                           l2=l2, max_iters=max_iters)
    model.save(out)
    click.echo(f"trained on {len(data)} sentences, "
               f"{log.iterations} iterations, objective {log.objectives[-1]:.4f}")
    click.echo(f"model written to {out}")


@train.command("neural")
@click.option("--train", "train_dir", required=True, type=click.Path(exists=True))
@click.option("--out", required=True, type=click.Path())
@click.option("--seed", default=0, show_default=True)
@click.option("--epochs", default=50, show_default=True)
@click.option("--dev-size", default=40, show_default=True)
@click.option("--dict", "dict_tsv", type=click.Path(exists=True))
def train_neural_cmd(train_dir, out, seed, epochs, dev_size, dict_tsv) -> None:
    data = [s for n in load_corpus(train_dir) for s in n.active_sentences()]
    cfg = NeuralConfig(seed=seed, max_epochs=epochs, dev_size=dev_size)
    model, log = train_neural(data, cfg, sup=_load_dictionary(dict_tsv))
    model.save(out)
    click.echo(f"best dev accuracy {max(log.dev_accuracies):.4f} "
               f"at epoch {log.best_epoch + 1}")
    click.echo(f"checkpoint written to {out}")


@train.command("gdb")
@click.option("--annotated", "annotated_dir", required=True, type=click.Path(exists=True))
@click.option("--mono", "mono_dir", required=True, type=click.Path(exists=True))
@click.option("--dict", "dict_tsv", type=click.Path(exists=True),
              help="projected-tag dictionary TSV used as extra seeds")
@click.option("--out", required=True, type=click.Path())
@click.option("--em-iters", default=3, show_default=True)
@click.option("--keep-threshold", default=0.1, show_default=True)
def train_gdb_cmd(annotated_dir, mono_dir, dict_tsv, out, em_iters, keep_threshold) -> None:
    annotated = [s for n in load_corpus(annotated_dir) for s in n.active_sentences()]
    mono = [s for n in load_corpus(mono_dir) for s in n.active_sentences()]
    cfg = GdbConfig(em_iters=em_iters, keep_threshold=keep_threshold)
    model = train_gdb(annotated, mono, projected=_load_dictionary(dict_tsv), cfg=cfg)
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    model.hmm.save(out / "hmm.npz")
    model.dictionary.save_tsv(out / "dictionary.tsv")
    click.echo(f"expanded dictionary covers {len(model.dictionary)} types")
    click.echo(f"model written to {out}/")


# -- projection -------------------------------------------------------------------------

@main.command("project")
@click.option("--train", "train_dir", required=True, type=click.Path(exists=True),
              help="parallel corpus directory (.grk/.ita/.itag)")
@click.option("--test", "test_dir", type=click.Path(exists=True))
@click.option("--mode", type=click.Choice(["train_only", "transductive"]),
              default="train_only", show_default=True)
@click.option("--mapping", type=click.Path(exists=True),
              help="source->universal tagset mapping for the .itag files")
@click.option("--p-high", default=0.9, show_default=True)
@click.option("--min-freq", default=5, show_default=True)
@click.option("--prob-source", type=click.Choice(["posterior", "lexical"]),
              default="posterior", show_default=True)
@click.option("--iters", default=20, show_default=True, help="EM iterations")
@click.option("--external-links", type=click.Path(exists=True),
              help="ingest precomputed alignments instead of running EM")
@click.option("--out", required=True, type=click.Path())
@click.option("--links-out", type=click.Path(), help="also dump extracted links")
def project_cmd(train_dir, test_dir, mode, mapping, p_high, min_freq, prob_source,
                iters, external_links, out, links_out) -> None:
    """Build a type-level projected tag dictionary from parallel data."""
    mapping_obj = TagsetMapping.load(mapping) if mapping else None
    parallel_train = load_parallel_corpus(train_dir, mapping=mapping_obj)
    parallel_test = (load_parallel_corpus(test_dir, mapping=mapping_obj)
                     if test_dir else None)
    filt = ProjectionFilter(p_high=p_high, min_freq=min_freq, prob_source=prob_source)
    ext = load_external_links(external_links) if external_links else None
    result = build_projected_dictionary(parallel_train, parallel_test, mode=mode,
                                        filt=filt, em_iters=iters,
                                        external_links=ext)
    result.dictionary.save_tsv(out)
    if links_out:
        save_links(result.links, links_out)
    click.echo(f"projected tags for {len(result.dictionary)} types -> {out}")


# -- experiments -------------------------------------------------------------------------

def _experiment_data(annotated_dir, test_dir, mono_dir, parallel_dir,
                     parallel_test_dir, mapping, seed) -> ExperimentData:
    mapping_obj = TagsetMapping.load(mapping) if mapping else None
    annotated = [s for n in load_corpus(annotated_dir) for s in n.active_sentences()]
    test = list(load_corpus(test_dir))
    mono = ([s for n in load_corpus(mono_dir) for s in n.active_sentences()]
            if mono_dir else [])
    return ExperimentData(
        annotated=annotated,
        test=test,
        mono=mono,
        parallel_train=(load_parallel_corpus(parallel_dir, mapping=mapping_obj)
                        if parallel_dir else None),
        parallel_test=(load_parallel_corpus(parallel_test_dir, mapping=mapping_obj)
                       if parallel_test_dir else None),
        seed=seed,
    )


def _parse_condition(label: str) -> DataCondition:
    parts = [p for p in label.split("+") if p]
    if parts == ["base"]:
        parts = []
    add_mono = "mono" in parts
    projections = [p for p in parts if p in ("clp", "clpa")]
    leftovers = [p for p in parts if p not in ("mono", "clp", "clpa")]
    if leftovers:
        raise click.BadParameter(f"unknown condition part(s): {leftovers}")
    return DataCondition(add_projection=projections[0] if projections else "none",
                         add_monolingual=add_mono)


common_data_options = [
    click.option("--annotated", "annotated_dir", required=True, type=click.Path(exists=True)),
    click.option("--test", "test_dir", required=True, type=click.Path(exists=True)),
    click.option("--mono", "mono_dir", type=click.Path(exists=True)),
    click.option("--parallel", "parallel_dir", type=click.Path(exists=True)),
    click.option("--parallel-test", "parallel_test_dir", type=click.Path(exists=True)),
    click.option("--mapping", type=click.Path(exists=True)),
    click.option("--seed", default=0, show_default=True),
    click.option("--crf-max-iters", default=100, show_default=True),
    click.option("--out", "out_dir", required=True, type=click.Path()),
]


def _with_options(options):
    def wrap(fn):
        for option in reversed(options):
            fn = option(fn)
        return fn
    return wrap


@main.command("grid")
@_with_options(common_data_options)
@click.option("--taggers", default="crf-mod,gdb", show_default=True)
@click.option("--conditions", default="base,mono,mono+clp", show_default=True)
def grid_cmd(annotated_dir, test_dir, mono_dir, parallel_dir, parallel_test_dir,
             mapping, seed, crf_max_iters, out_dir, taggers, conditions) -> None:
    """Tagger x data-condition accuracy grid."""
    data = _experiment_data(annotated_dir, test_dir, mono_dir, parallel_dir,
                            parallel_test_dir, mapping, seed)
    tagger_objs = [make_tagger(n.strip(), crf_max_iters=crf_max_iters)
                   for n in taggers.split(",") if n.strip()]
    condition_objs = [_parse_condition(c.strip()) for c in conditions.split(",")]
    result = run_grid(tagger_objs, condition_objs, data)
    out = Path(out_dir)
    reports.write_tsv(result.rows(), out / "grid.tsv")
    reports.write_json(result.rows(), out / "grid.json")
    reports.render_grid_figure(result.rows(), out / "grid.png")
    for row in result.rows():
        click.echo(f"{row['tagger']:>10} | {row['condition']:<10} | {row['accuracy']:.4f}")
    click.echo(f"reports in {out}/: grid.tsv grid.json grid.png")


@main.command("al")
@_with_options(common_data_options)
@click.option("--taggers", default="crf-mod", show_default=True)
@click.option("--annotator", type=click.Choice(["oracle", "service"]),
              default="oracle", show_default=True)
@click.option("--service-url", help="base URL of a running annotation service")
@click.option("--dict", "dict_tsv", type=click.Path(exists=True))
def al_cmd(annotated_dir, test_dir, mono_dir, parallel_dir, parallel_test_dir,
           mapping, seed, crf_max_iters, out_dir, taggers, annotator,
           service_url, dict_tsv) -> None:
    """Narrative-level active-learning loop with a gold oracle annotator,
    or a scripted client replaying oracle corrections against a service."""
    data = _experiment_data(annotated_dir, test_dir, mono_dir, parallel_dir,
                            parallel_test_dir, mapping, seed)
    out = Path(out_dir)
    if annotator == "service":
        if not service_url:
            raise click.BadParameter("--annotator service needs --service-url")
        log = _drive_service(service_url, data.test)
    else:
        dictionary = _load_dictionary(dict_tsv)
        tagger_objs = [make_tagger(n.strip(), crf_max_iters=crf_max_iters)
                       for n in taggers.split(",") if n.strip()]

        def make_train_data(pool):
            return TrainData(annotated=pool, dictionary=dictionary,
                             mono=data.mono or None, seed=seed)

        result = run_active_learning(data.annotated, data.test, tagger_objs,
                                     make_train_data, OracleAnnotator(), seed=seed)
        log = result.log
        reports.write_json(result.without_al, out / "al_without.json")
    rows = [{k: rec[k] for k in ("iteration", "narrative_id", "best_method",
                                 "pool_sentences", "changed_count",
                                 "accuracy_on_annotated")} for rec in log]
    reports.write_tsv(rows, out / "al.tsv")
    reports.write_json(log, out / "al.json")
    reports.render_al_curve(log, out / "al_curve.png")
    for rec in log:
        click.echo(f"iter {rec['iteration']:>2} {rec['narrative_id']:<12} "
                   f"{rec['best_method']:<8} acc {rec['accuracy_on_annotated']:.4f}")
    click.echo(f"reports in {out}/: al.tsv al.json al_curve.png")


def _drive_service(url: str, test_narratives) -> list[dict]:
    import httpx
    gold = {n.id: [[str(t) for t in s.tags] for s in n.active_sentences()]
            for n in test_narratives}
    with httpx.Client(base_url=url, timeout=300.0) as client:
        while True:
            response = client.get("/api/tasks/next")
            if response.status_code == 404:
                break
            if response.status_code == 503:
                import time
                time.sleep(0.2)
                continue
            response.raise_for_status()
            task = response.json()
            result = client.post(f"/api/tasks/{task['task_id']}/submit",
                                 json={"annotator_id": "oracle",
                                       "tags": gold[task["narrative_id"]]})
            result.raise_for_status()
            ticket = result.json()["retrain_ticket"]
            while client.get(f"/api/retrain/{ticket}").json()["status"] not in ("done", "failed"):
                import time
                time.sleep(0.1)
        return client.get("/api/metrics").json()["log"]


@main.command("cv")
@_with_options(common_data_options)
@click.option("--tagger", default="crf-mod", show_default=True)
@click.option("--dict", "dict_tsv", type=click.Path(exists=True))
def cv_cmd(annotated_dir, test_dir, mono_dir, parallel_dir, parallel_test_dir,
           mapping, seed, crf_max_iters, out_dir, tagger, dict_tsv) -> None:
    """Leave-one-narrative-out cross-validation over the test narratives,
    training on the remaining ones plus the base corpus."""
    data = _experiment_data(annotated_dir, test_dir, mono_dir, parallel_dir,
                            parallel_test_dir, mapping, seed)
    dictionary = _load_dictionary(dict_tsv)

    def make_train_data(pool):
        return TrainData(annotated=pool, dictionary=dictionary,
                         mono=data.mono or None, seed=seed)

    result = cross_validate(data.test, make_tagger(tagger, crf_max_iters=crf_max_iters),
                            make_train_data, base_pool=data.annotated)
    out = Path(out_dir)
    reports.write_tsv(result.rows(), out / "cv.tsv")
    reports.write_json({
        "folds": result.rows(), "mean": result.mean, "sd": result.sd,
        "min": {"fold": result.min_fold[0], "accuracy": result.min_fold[1]},
        "max": {"fold": result.max_fold[0], "accuracy": result.max_fold[1]},
    }, out / "cv.json")
    reports.render_cv_figure(result.folds, result.mean, out / "cv.png")
    for fid, acc in result.folds:
        click.echo(f"{fid:<14} {acc:.4f}")
    click.echo(f"mean {result.mean:.4f}  sd {result.sd:.4f}  "
               f"min {result.min_fold[0]} {result.min_fold[1]:.4f}  "
               f"max {result.max_fold[0]} {result.max_fold[1]:.4f}")
    click.echo(f"reports in {out}/: cv.tsv cv.json cv.png")


# -- service ----------------------------------------------------------------------------

@main.command("serve")
@click.option("--config", "config_path", type=click.Path(exists=True))
@click.option("--port", type=int)
def serve_cmd(config_path, port) -> None:
    """Run the annotation service (config file + GLOSSA_* env overrides)."""
    import uvicorn

    from .service import ServiceConfig, create_app, service_from_config

    config = ServiceConfig.load(config_path)
    if port is not None:
        config.port = port
    service = service_from_config(config)
    app = create_app(service, auth_token=config.auth_token)
    uvicorn.run(app, host="0.0.0.0", port=config.port)


# -- synthetic benchmark -------------------------------------------------------------------

@main.command("synth")
@click.option("--out", "out_dir", required=True, type=click.Path())
@click.option("--seed", default=0, show_default=True)
@click.option("--test-narratives", default=10, show_default=True)
@click.option("--annotated-narratives", default=3, show_default=True)
@click.option("--parallel-narratives", default=24, show_default=True)
def synth_cmd(out_dir, seed, test_narratives, annotated_narratives,
              parallel_narratives) -> None:
    """Generate a synthetic diglot benchmark corpus on disk."""
    cfg = SyntheticConfig(seed=seed, n_test_narratives=test_narratives,
                          n_annotated_narratives=annotated_narratives,
                          n_parallel_narratives=parallel_narratives)
    data = generate(cfg)
    out = Path(out_dir)
    save_corpus(Corpus(data.annotated), out / "base")
    save_corpus(Corpus(data.test), out / "test")
    save_corpus(data.mono, out / "mono")
    for directory, parallel in (("parallel", data.parallel_train),
                                ("parallel-test", data.parallel_test)):
        target = out / directory
        target.mkdir(parents=True, exist_ok=True)
        for pair in parallel:
            save_narrative(pair.griko, target / f"{pair.id}.grk")
            save_narrative(pair.italian, target / f"{pair.id}.ita")
            with open(target / f"{pair.id}.itag", "w", encoding="utf-8") as fh:
                for sent, tags in zip(pair.italian.sentences, pair.italian_tags):
                    fh.write(" ".join(f"{t.surface}_{tag}"
                                      for t, tag in zip(sent.tokens, tags)) + "\n")
    with open(out / "lexicon.tsv", "w", encoding="utf-8") as fh:
        for g, (i, tag) in sorted(data.lexicon.items()):
            fh.write(f"{g}\t{i}\t{tag}\n")
    click.echo(f"synthetic benchmark written to {out}/ "
               f"(base, test, mono, parallel, parallel-test, lexicon.tsv)")


if __name__ == "__main__":
    main()
