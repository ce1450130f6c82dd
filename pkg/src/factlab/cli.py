"""Command-line workbench.

One subcommand per pipeline stage: ingest, stats, audit-bias, retrieve,
train-verifier, eval-verifier, build-adversarial, qc sample/agree,
inoculate, serve-annotation. Defaults can live in an INI config file
(--config); explicit flags always win. All file outputs are written
atomically (temp file + rename) and deterministically: rerunning a
command on the same inputs reproduces the bytes.
"""

from __future__ import annotations

import configparser
import csv
import io
import json
import os
import sys
import tempfile
from pathlib import Path

import click

from factlab import adversarial, bias_audit, corpus as corpus_mod, inoculation
from factlab import retrieval as retrieval_mod
from factlab import verification
from factlab.corpus import Corpus, IngestMapping, Label, ingest_jsonl
from factlab.errors import FactlabError
from factlab.segmenter import Lexicon


# --- shared plumbing --------------------------------------------------------


def _atomic_write(path: str | Path, text: str) -> None:
    """Write via a temp file in the same directory, then rename."""
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent or Path("."), suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _csv_text(rows) -> str:
    buf = io.StringIO()
    csv.writer(buf, lineterminator="\n").writerows(rows)
    return buf.getvalue()


def _cfg(ctx) -> configparser.ConfigParser | None:
    return (ctx.obj or {}).get("config")


def _opt(ctx, section: str, key: str, flag_value, default, cast=str):
    """Flag beats config beats default."""
    if flag_value is not None:
        return flag_value
    cfg = _cfg(ctx)
    if cfg is not None and cfg.has_option(section, key):
        raw = cfg.get(section, key)
        return cast(raw) if cast is not bool else cfg.getboolean(section, key)
    return default


def _load_corpus(path: str, mapping_path: str | None = None) -> Corpus:
    mapping = IngestMapping.from_file(mapping_path) if mapping_path else None
    result = ingest_jsonl(path, mapping)
    if result.rejects:
        click.echo(f"warning: {len(result.rejects)} lines rejected in {path}", err=True)
    if len(result.corpus) == 0:
        raise click.ClickException(f"no usable records in {path}")
    return result.corpus


def _load_lexicon(ctx, lexicon_path: str | None) -> Lexicon:
    path = _opt(ctx, "segmenter", "lexicon", lexicon_path, None)
    return Lexicon.from_file(path) if path else Lexicon()


def _parse_label(value: str) -> Label:
    try:
        return Label(value.upper())
    except ValueError:
        raise click.ClickException(
            f"unknown label {value!r}; expected one of {[l.value for l in Label]}"
        )


def _int_list(raw: str) -> tuple[int, ...]:
    try:
        return tuple(int(p) for p in raw.replace(" ", "").split(",") if p)
    except ValueError:
        raise click.ClickException(f"expected comma-separated integers, got {raw!r}")


@click.group()
@click.option(
    "-c",
    "--config",
    "config_path",
    type=click.Path(exists=True, dir_okay=False),
    default=None,
    help="INI file with per-command defaults; flags override it.",
)
@click.pass_context
def main(ctx, config_path):
    """Fact-checking dataset workbench."""
    ctx.ensure_object(dict)
    if config_path:
        parser = configparser.ConfigParser()
        parser.read(config_path, encoding="utf-8")
        ctx.obj["config"] = parser


# --- ingest / stats ---------------------------------------------------------


@main.command()
@click.argument("input_path", type=click.Path(exists=True, dir_okay=False))
@click.argument("output_path", type=click.Path(dir_okay=False))
@click.option("--mapping", "mapping_path", type=click.Path(exists=True), default=None,
              help="JSON field/label mapping for non-canonical input.")
@click.option("--rejects", "rejects_path", type=click.Path(dir_okay=False), default=None,
              help="Where to write rejected lines (JSONL).")
def ingest(input_path, output_path, mapping_path, rejects_path):
    """Validate raw JSONL and write the canonical dataset."""
    mapping = IngestMapping.from_file(mapping_path) if mapping_path else None
    result = ingest_jsonl(input_path, mapping)
    buf = io.StringIO()
    for record in result.corpus:
        buf.write(json.dumps(corpus_mod.record_to_dict(record), ensure_ascii=False) + "\n")
    _atomic_write(output_path, buf.getvalue())
    if rejects_path:
        rej = io.StringIO()
        for r in result.rejects:
            rej.write(json.dumps({"line_no": r.line_no, "reason": r.reason},
                                 ensure_ascii=False) + "\n")
        _atomic_write(rejects_path, rej.getvalue())
    for warning in result.warnings:
        click.echo(f"warning line {warning.line_no} ({warning.record_id}): "
                   f"{warning.message}", err=True)
    click.echo(
        f"accepted {len(result.corpus)} / {result.n_lines} lines "
        f"({len(result.rejects)} rejected)"
    )
    if len(result.corpus) == 0:
        raise click.ClickException("no records accepted")


@main.command()
@click.argument("input_path", type=click.Path(exists=True, dir_okay=False))
@click.option("--out", "out_path", type=click.Path(dir_okay=False), default=None,
              help="Write the domain/label table as CSV.")
def stats(input_path, out_path):
    """Per-domain label distribution of a canonical dataset."""
    report = corpus_mod.corpus_stats(_load_corpus(input_path))
    if out_path:
        _atomic_write(out_path, _csv_text(report.to_csv_rows()))
    click.echo(report.to_markdown())


# --- bias audit --------------------------------------------------------------


@main.command("audit-bias")
@click.argument("input_path", type=click.Path(exists=True, dir_okay=False))
@click.option("--label", "label_str", default=None, help="Label to audit (default: all).")
@click.option("--k", type=int, default=None, help="Top phrases to report (default 10).")
@click.option("--min-count", type=int, default=None,
              help="Minimum phrase occurrences (default 5).")
@click.option("--ngram", type=int, default=None, help="Phrase length in words (default 1).")
@click.option("--lexicon", "lexicon_path", type=click.Path(exists=True), default=None)
@click.option("--out", "out_path", type=click.Path(dir_okay=False), default=None)
@click.pass_context
def audit_bias(ctx, input_path, label_str, k, min_count, ngram, lexicon_path, out_path):
    """Rank claim phrases by label association (LMI and p(label|phrase))."""
    data = _load_corpus(input_path)
    lexicon = _load_lexicon(ctx, lexicon_path)
    k = _opt(ctx, "bias", "k", k, 10, int)
    min_count = _opt(ctx, "bias", "min_count", min_count, bias_audit.DEFAULT_MIN_COUNT, int)
    ngram = _opt(ctx, "bias", "ngram", ngram, 1, int)
    table = bias_audit.build_count_table(data, lexicon, n=ngram)
    labels = [_parse_label(label_str)] if label_str else list(corpus_mod.LABEL_ORDER)
    all_stats = []
    for label in labels:
        stats_l = bias_audit.top_k_by_lmi(table, label, k, min_count=min_count)
        all_stats.extend(stats_l)
        if stats_l:
            click.echo(f"\n{label.value}:")
            click.echo(bias_audit.phrase_stats_markdown(stats_l))
    if out_path:
        _atomic_write(out_path, _csv_text(bias_audit.phrase_stats_csv_rows(all_stats)))


# --- retrieval ----------------------------------------------------------------


def _build_retrievals(ctx, data, scorer_name, threshold, k, lexicon, max_in_flight):
    cfg = retrieval_mod.RetrievalConfig(threshold=threshold, k=k)
    if scorer_name == "lexical":
        scorer = lambda claim, doc: retrieval_mod.lexical_token_scorer(claim, doc, lexicon)
        return retrieval_mod.retrieve_corpus(data, scorer, cfg)
    if scorer_name == "semantic":
        return {r.id: retrieval_mod.semantic_retrieve_for_claim(r, cfg) for r in data}
    if scorer_name.startswith("remote-pair:"):
        pair = retrieval_mod.RemotePairScorer(scorer_name.split(":", 1)[1])
        return {r.id: retrieval_mod.rank_with_pair_scorer(r, pair, cfg) for r in data}
    if scorer_name.startswith("remote:"):
        scorer = retrieval_mod.RemoteTokenScorer(scorer_name.split(":", 1)[1])
        return retrieval_mod.retrieve_corpus(data, scorer, cfg, max_in_flight=max_in_flight)
    raise click.ClickException(
        f"unknown scorer {scorer_name!r}; use lexical, semantic, remote:<url>, "
        "or remote-pair:<url>"
    )


@main.command()
@click.argument("input_path", type=click.Path(exists=True, dir_okay=False))
@click.option("--scorer", "scorer_name", default=None,
              help="lexical | semantic | remote:<url> | remote-pair:<url>")
@click.option("--threshold", type=float, default=None,
              help="Sentence selection threshold (default 0.5, strict >).")
@click.option("--k", type=int, default=None, help="Cutoff for recall@k (default 5).")
@click.option("--lexicon", "lexicon_path", type=click.Path(exists=True), default=None)
@click.option("--out-csv", type=click.Path(dir_okay=False), default=None)
@click.option("--out-jsonl", type=click.Path(dir_okay=False), default=None)
@click.option("--recall-mode", type=click.Choice(["coverage", "any_hit"]), default=None)
@click.option("--max-in-flight", type=int, default=None,
              help="Concurrent requests for remote scorers (default 1).")
@click.pass_context
def retrieve(ctx, input_path, scorer_name, threshold, k, lexicon_path, out_csv,
             out_jsonl, recall_mode, max_in_flight):
    """Rank and select evidence sentences for every claim."""
    data = _load_corpus(input_path)
    lexicon = _load_lexicon(ctx, lexicon_path)
    scorer_name = _opt(ctx, "retrieval", "scorer", scorer_name, "lexical")
    threshold = _opt(ctx, "retrieval", "threshold", threshold,
                     retrieval_mod.DEFAULT_THRESHOLD, float)
    k = _opt(ctx, "retrieval", "k", k, retrieval_mod.DEFAULT_K, int)
    recall_mode = _opt(ctx, "retrieval", "recall_mode", recall_mode, "coverage")
    max_in_flight = _opt(ctx, "retrieval", "max_in_flight", max_in_flight, 1, int)

    results = _build_retrievals(ctx, data, scorer_name, threshold, k, lexicon, max_in_flight)

    if out_csv:
        rows = [["claim_id", "rank", "doc_id", "sent_index", "score", "selected"]]
        for record in data:
            res = results[record.id]
            chosen = set(res.selected)
            for rank, (ref, score) in enumerate(res.ranked, start=1):
                rows.append([record.id, str(rank), ref[0], str(ref[1]),
                             f"{score:.6f}", "1" if ref in chosen else "0"])
        _atomic_write(out_csv, _csv_text(rows))
    if out_jsonl:
        buf = io.StringIO()
        for record in data:
            res = results[record.id]
            docs = {d.doc_id: d for d in record.documents}
            scores = dict(res.ranked)
            selected = [
                {
                    "doc_id": ref[0],
                    "sent_index": ref[1],
                    "text": docs[ref[0]].sentences[ref[1]].text,
                    "score": scores[ref],
                }
                for ref in res.evidence_refs()
            ]
            buf.write(json.dumps(
                {"claim_id": record.id, "selected": selected,
                 "fallback_used": res.fallback_used},
                ensure_ascii=False) + "\n")
        _atomic_write(out_jsonl, buf.getvalue())

    gold = {r.id: r.resolve_gold() for r in data}
    gold = {cid: refs for cid, refs in gold.items() if refs}
    if gold:
        top = {cid: res.top_k(k) for cid, res in results.items()}
        report = retrieval_mod.recall_at_k(top, gold, k, mode=recall_mode)
        if len(report.per_claim) >= 2:
            mean, std = retrieval_mod.bootstrap_interval(
                list(report.per_claim.values())
            )
            click.echo(f"recall@{k} ({recall_mode}): "
                       f"{100 * mean:.2f} ± {100 * std:.2f} "
                       f"(n={len(report.per_claim)}, excluded={len(report.excluded)})")
        else:
            click.echo(f"recall@{k} ({recall_mode}): {100 * report.mean:.2f} "
                       f"(n={len(report.per_claim)})")
    else:
        click.echo("no gold evidence; recall skipped")


# --- verifier -----------------------------------------------------------------


def _hyperparams(ctx, lr, epochs, l2, hash_bits) -> verification.Hyperparams:
    return verification.Hyperparams(
        learning_rate=_opt(ctx, "verifier", "learning_rate", lr, 0.5, float),
        epochs=_opt(ctx, "verifier", "epochs", epochs, 300, int),
        l2=_opt(ctx, "verifier", "l2", l2, 1e-4, float),
        hash_bits=_opt(ctx, "verifier", "hash_bits", hash_bits, 18, int),
    )


@main.command("train-verifier")
@click.argument("train_path", type=click.Path(exists=True, dir_okay=False))
@click.argument("model_out", type=click.Path(dir_okay=False))
@click.option("--mode", type=click.Choice(list(verification.MODES)), default=None)
@click.option("--evidence", type=click.Choice(["gold", "none"]), default="gold",
              help="Evidence fed to the verifier during training.")
@click.option("--lr", type=float, default=None)
@click.option("--epochs", type=int, default=None)
@click.option("--l2", type=float, default=None)
@click.option("--hash-bits", type=int, default=None)
@click.option("--seed", type=int, default=None)
@click.option("--lexicon", "lexicon_path", type=click.Path(exists=True), default=None)
@click.pass_context
def train_verifier(ctx, train_path, model_out, mode, evidence, lr, epochs, l2,
                   hash_bits, seed, lexicon_path):
    """Fit the linear verifier and save it."""
    data = _load_corpus(train_path)
    lexicon = _load_lexicon(ctx, lexicon_path)
    mode = _opt(ctx, "verifier", "mode", mode, "claim_evidence")
    seed = _opt(ctx, "verifier", "seed", seed, 0, int)
    dataset = verification.dataset_from_corpus(data, evidence=evidence)
    model = verification.train(
        dataset,
        mode=mode,
        hyperparams=_hyperparams(ctx, lr, epochs, l2, hash_bits),
        seed=seed,
        lexicon=lexicon,
    )
    out = Path(model_out)
    tmp = out.with_suffix(out.suffix + ".tmp")
    verification.save_model(model, tmp)
    os.replace(tmp, out)
    click.echo(f"trained on {len(dataset)} examples (mode={mode}, seed={seed}); "
               f"final loss {model.final_loss:.6f}")


@main.command("eval-verifier")
@click.argument("test_path", type=click.Path(exists=True, dir_okay=False))
@click.option("--model", "model_path", type=click.Path(exists=True, dir_okay=False),
              default=None, help="Saved model file.")
@click.option("--remote", "remote_url", default=None, help="Remote verifier endpoint.")
@click.option("--shots", type=int, default=0,
              help="In-context exemplars to send to a remote verifier.")
@click.option("--shots-from", "shots_path", type=click.Path(exists=True, dir_okay=False),
              default=None, help="Dataset the exemplars are drawn from (first N).")
@click.option("--evidence", type=click.Choice(["gold", "none"]), default="gold")
@click.option("--out", "out_path", type=click.Path(dir_okay=False), default=None)
def eval_verifier(test_path, model_path, remote_url, shots, shots_path, evidence, out_path):
    """Score a verifier (local model file or remote endpoint) on a dataset."""
    if bool(model_path) == bool(remote_url):
        raise click.ClickException("pass exactly one of --model or --remote")
    data = _load_corpus(test_path)
    dataset = verification.dataset_from_corpus(data, evidence=evidence)
    inputs = [x for x, _ in dataset]
    golds = [y for _, y in dataset]
    if model_path:
        model = verification.load_model(model_path)
        preds = verification.predict_many(model, inputs)
    else:
        if shots and not shots_path:
            raise click.ClickException("--shots needs --shots-from")
        shot_examples = []
        if shots:
            pool = verification.dataset_from_corpus(
                _load_corpus(shots_path), evidence="gold"
            )
            shot_examples = pool[:shots]
        remote = verification.RemoteVerifier(remote_url)
        preds = [remote(x, shots=shot_examples)[0] for x in inputs]
    report = verification.evaluate(preds, golds)
    click.echo(report.to_markdown())
    if out_path:
        _atomic_write(out_path, _csv_text(report.to_csv_rows()))


# --- adversarial --------------------------------------------------------------


@main.command("build-adversarial")
@click.argument("input_path", type=click.Path(exists=True, dir_okay=False))
@click.argument("output_path", type=click.Path(dir_okay=False))
@click.option("--rewriter", type=click.Choice(["rules", "llm"]), default=None)
@click.option("--endpoint", default=None, help="Chat-completion endpoint for --rewriter llm.")
@click.option("--llm-model", default=None, help="Model name for --rewriter llm.")
@click.option("--overlap-threshold", type=float, default=None)
@click.option("--retries", type=int, default=None)
@click.option("--skipped-out", type=click.Path(dir_okay=False), default=None,
              help="JSONL report of instances that could not be rewritten.")
@click.option("--lexicon", "lexicon_path", type=click.Path(exists=True), default=None)
@click.pass_context
def build_adversarial(ctx, input_path, output_path, rewriter, endpoint, llm_model,
                      overlap_threshold, retries, skipped_out, lexicon_path):
    """Rewrite claim/evidence pairs and expand them into the symmetric set.

    With --rewriter llm the API key is taken from FACTLAB_LLM_API_KEY;
    there is no flag or config entry for it.
    """
    data = _load_corpus(input_path)
    lexicon = _load_lexicon(ctx, lexicon_path)
    rewriter = _opt(ctx, "adversarial", "rewriter", rewriter, "rules")
    overlap = _opt(ctx, "adversarial", "overlap_threshold", overlap_threshold,
                   adversarial.DEFAULT_OVERLAP_THRESHOLD, float)
    retries = _opt(ctx, "adversarial", "retries", retries,
                   adversarial.DEFAULT_RETRIES, int)

    instances = [
        inst for inst in adversarial.instances_from_corpus(data)
        if inst.label != Label.NEI
    ]
    skipped_nei = len(data) - len(instances)
    if not instances:
        raise click.ClickException("no binary-label claim/evidence pairs to rewrite")

    if rewriter == "rules":
        ruleset = adversarial.RuleSet()

        def run(inst):
            pair = adversarial.rewrite_rule_based(inst, ruleset)
            adversarial.check_rewrite_invariants(pair, lexicon, overlap)
            return pair

    else:
        endpoint = _opt(ctx, "adversarial", "endpoint", endpoint, None)
        llm_model = _opt(ctx, "adversarial", "model", llm_model, None)
        if not endpoint or not llm_model:
            raise click.ClickException("--rewriter llm needs --endpoint and --llm-model")
        client = adversarial.LlmClient(endpoint, llm_model)

        def run(inst):
            return adversarial.rewrite_via_llm(
                inst, client, lexicon=lexicon,
                overlap_threshold=overlap, retries=retries,
            )

    pairs, skipped = adversarial.rewrite_corpus(instances, run)
    if not pairs:
        raise click.ClickException("every instance was skipped; nothing to build")
    symmetric = adversarial.build_symmetric(pairs)
    buf = io.StringIO()
    for record in symmetric:
        buf.write(json.dumps(corpus_mod.record_to_dict(record), ensure_ascii=False) + "\n")
    _atomic_write(output_path, buf.getvalue())
    if skipped_out:
        rep = io.StringIO()
        for pair_id, reason in skipped:
            rep.write(json.dumps({"pair_id": pair_id, "reason": reason},
                                 ensure_ascii=False) + "\n")
        _atomic_write(skipped_out, rep.getvalue())
    click.echo(
        f"built {len(symmetric)} instances from {len(pairs)} pairs "
        f"({len(skipped)} skipped, {skipped_nei} non-binary dropped)"
    )


# --- quality control ------------------------------------------------------------


@main.group()
def qc():
    """Quality-control sampling and agreement."""


@qc.command("sample")
@click.argument("input_path", type=click.Path(exists=True, dir_okay=False))
@click.argument("output_path", type=click.Path(dir_okay=False))
@click.option("--fraction", type=float, default=None, help="Sample fraction (default 0.25).")
@click.option("--seed", type=int, default=None)
@click.pass_context
def qc_sample(ctx, input_path, output_path, fraction, seed):
    """Draw a label-stripped audit sample from a dataset."""
    data = _load_corpus(input_path)
    fraction = _opt(ctx, "qc", "fraction", fraction, 0.25, float)
    seed = _opt(ctx, "qc", "seed", seed, 0, int)
    items = adversarial.sample_for_qc(data, fraction, seed)
    buf = io.StringIO()
    for item in items:
        buf.write(json.dumps(
            {"pair_id": item.pair_id, "claim": item.claim, "evidence": item.evidence},
            ensure_ascii=False) + "\n")
    _atomic_write(output_path, buf.getvalue())
    click.echo(f"sampled {len(items)} of {len(data)} (fraction={fraction}, seed={seed})")


def _read_ratings(path: str) -> dict[str, str]:
    ratings: dict[str, str] = {}
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        if not line.strip():
            continue
        row = json.loads(line)
        ratings[str(row["pair_id"])] = str(row["label"])
    return ratings


@qc.command("agree")
@click.argument("file_a", type=click.Path(exists=True, dir_okay=False))
@click.argument("file_b", type=click.Path(exists=True, dir_okay=False))
def qc_agree(file_a, file_b):
    """Cohen's kappa between two annotation files (JSONL with pair_id, label)."""
    a, b = _read_ratings(file_a), _read_ratings(file_b)
    shared = sorted(set(a) & set(b))
    if len(shared) < 2:
        raise click.ClickException(
            f"need at least 2 shared pair_ids, found {len(shared)}"
        )
    result = adversarial.cohen_kappa([a[p] for p in shared], [b[p] for p in shared])
    click.echo(
        f"kappa={result.kappa:.4f} observed={result.observed_agreement:.4f} "
        f"expected={result.expected_agreement:.4f} n={result.n_items}"
    )


# --- inoculation -----------------------------------------------------------------


@main.command()
@click.argument("base_path", type=click.Path(exists=True, dir_okay=False))
@click.argument("pool_path", type=click.Path(exists=True, dir_okay=False))
@click.argument("eval_orig_path", type=click.Path(exists=True, dir_okay=False))
@click.argument("eval_adv_path", type=click.Path(exists=True, dir_okay=False))
@click.argument("out_dir", type=click.Path(file_okay=False))
@click.option("--sizes", "sizes_str", default=None, help="Comma-separated pool sizes.")
@click.option("--seeds", "seeds_str", default=None, help="Comma-separated training seeds.")
@click.option("--mode", type=click.Choice(list(verification.MODES)), default=None)
@click.option("--lr", type=float, default=None)
@click.option("--epochs", type=int, default=None)
@click.option("--l2", type=float, default=None)
@click.option("--hash-bits", type=int, default=None)
@click.option("--tau-gap", type=float, default=None)
@click.option("--tau-orig", type=float, default=None)
@click.option("--lexicon", "lexicon_path", type=click.Path(exists=True), default=None)
@click.pass_context
def inoculate(ctx, base_path, pool_path, eval_orig_path, eval_adv_path, out_dir,
              sizes_str, seeds_str, mode, lr, epochs, l2, hash_bits, tau_gap,
              tau_orig, lexicon_path):
    """Sweep adversarial fine-tuning sizes and classify the outcome."""
    sizes_str = _opt(ctx, "inoculation", "sizes", sizes_str, "0,100,200,400,800")
    seeds_str = _opt(ctx, "inoculation", "seeds", seeds_str, "0,1,2,3,4")
    mode = _opt(ctx, "inoculation", "mode", mode, "claim_evidence")
    tau_gap = _opt(ctx, "inoculation", "tau_gap", tau_gap,
                   inoculation.DEFAULT_TAU_GAP, float)
    tau_orig = _opt(ctx, "inoculation", "tau_orig", tau_orig,
                    inoculation.DEFAULT_TAU_ORIG, float)
    config = inoculation.SweepConfig(
        sizes=_int_list(sizes_str),
        seeds=_int_list(seeds_str),
        mode=mode,
        hyperparams=_hyperparams(ctx, lr, epochs, l2, hash_bits),
    )
    result = inoculation.run_sweep(
        _load_corpus(base_path),
        _load_corpus(pool_path),
        _load_corpus(eval_orig_path),
        _load_corpus(eval_adv_path),
        config,
        lexicon=_load_lexicon(ctx, lexicon_path),
    )
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    _atomic_write(out / "sweep_detail.csv",
                  _csv_text(inoculation.sweep_detail_rows(result)))
    _atomic_write(out / "sweep_summary.csv",
                  _csv_text(inoculation.sweep_summary_rows(result)))
    outcome = inoculation.classify_outcome(result, tau_gap=tau_gap, tau_orig=tau_orig)
    click.echo(inoculation.summary_markdown(result, outcome))


# --- annotation server ------------------------------------------------------------


def _load_tasks(path: str) -> tuple[list, dict]:
    """Accept either a QC sample (pair_id/claim/evidence) or a canonical
    dataset; labels, when present, stay server-side."""
    tasks = []
    labels: dict[str, Label] = {}
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        if not line.strip():
            continue
        row = json.loads(line)
        if "pair_id" in row:
            tasks.append(adversarial.QCItem(
                str(row["pair_id"]), str(row["claim"]), str(row["evidence"])))
        else:
            record, _ = corpus_mod.record_from_raw(row, IngestMapping.identity(), 0)
            evidence = "\n".join(d.raw_text for d in record.documents)
            tasks.append(adversarial.QCItem(record.id, record.text, evidence))
            labels[record.id] = record.label
    return tasks, labels


@main.command("serve-annotation")
@click.argument("tasks_path", type=click.Path(exists=True, dir_okay=False))
@click.option("--host", default=None)
@click.option("--port", type=int, default=None)
@click.option("--store", "store_path", type=click.Path(dir_okay=False), default=None,
              help="Annotation JSONL store (appended; survives restarts).")
@click.option("--ui-dir", type=click.Path(file_okay=False, exists=True), default=None,
              help="Directory with the built annotation UI.")
@click.pass_context
def serve_annotation(ctx, tasks_path, host, port, store_path, ui_dir):
    """Serve the blind annotation API (and UI, when built)."""
    import uvicorn

    from factlab.server import create_annotation_app

    host = _opt(ctx, "server", "host", host, "127.0.0.1")
    port = _opt(ctx, "server", "port", port, 8787, int)
    store_path = _opt(ctx, "server", "store", store_path, "annotations.jsonl")
    ui_dir = _opt(ctx, "server", "ui_dir", ui_dir, None)
    tasks, labels = _load_tasks(tasks_path)
    if not tasks:
        raise click.ClickException(f"no tasks in {tasks_path}")
    app = create_annotation_app(tasks, store_path, dataset_labels=labels, ui_dir=ui_dir)
    click.echo(f"serving {len(tasks)} tasks on http://{host}:{port} "
               f"(store: {store_path})")
    uvicorn.run(app, host=host, port=port, log_level="warning")


def run():
    try:
        main(standalone_mode=True)
    except FactlabError as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(1)


if __name__ == "__main__":
    run()
