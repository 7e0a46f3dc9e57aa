"""Report assembly: deterministic drafting, writer edits, and output stats."""

from __future__ import annotations

import io
from dataclasses import replace
from typing import TYPE_CHECKING

from .model import (
    Block,
    Media,
    Report,
    ReportSection,
    ReportStatus,
    SubmissionState,
    ValidationError,
    WRITER_SOURCE,
    count_words,
)

if TYPE_CHECKING:
    from .engine import EventState

EDIT_ACTIONS = ("insert_text", "rewrite_text", "remove_block", "reorder_within_section")


def _recount(report: Report) -> Report:
    words = sum(
        count_words(block.body)
        for section in report.sections
        for block in section.blocks
        if block.kind == "text"
    )
    items = sum(
        1
        for section in report.sections
        for block in section.blocks
        if block.source != WRITER_SOURCE
    )
    return replace(report, word_count=words, item_count=items)


def build_draft(state: "EventState", report_id: str, actor: str) -> Report:
    """One block per approved submission, grouped by section in template order.

    Within a section blocks follow submission seq, so the draft is a pure
    function of the log prefix at close: drafting twice yields identical
    bytes.
    """
    approved = [
        state.submissions[sid]
        for sid in state.submission_order
        if state.submissions[sid].state == SubmissionState.APPROVED
    ]

    block_seq = 0
    by_section: dict[str, list[Block]] = {section.id: [] for section in state.sections}
    contributors: list[str] = []
    for submission in approved:
        task = state.tasks[submission.task_id]
        worker = state.workers[submission.worker_id]
        if worker.display_name not in contributors:
            contributors.append(worker.display_name)
        block_seq += 1
        content = submission.content
        if content.media == Media.TEXT:
            block = Block(
                id=f"b-{block_seq}",
                source=submission.id,
                kind="text",
                body=f'"{content.payload_ref}" — {worker.display_name}',
            )
        else:
            block = Block(
                id=f"b-{block_seq}",
                source=submission.id,
                kind="media_ref",
                body=content.payload_ref,
                caption=content.caption,
            )
        by_section[task.spec.target_section].append(block)

    byline = list(contributors)
    writer = state.workers.get(actor)
    if writer is not None and writer.display_name not in byline:
        byline.append(writer.display_name)

    draft = Report(
        id=report_id,
        event_id=state.event.id,
        status=ReportStatus.DRAFT,
        sections=tuple(
            ReportSection(section.id, section.title, tuple(by_section[section.id]))
            for section in state.sections
        ),
        byline=tuple(byline),
        word_count=0,
        item_count=0,
        block_seq=block_seq,
    )
    return _recount(draft)


def _find_block(report: Report, block_id: str) -> tuple[int, int, Block]:
    for si, section in enumerate(report.sections):
        for bi, block in enumerate(section.blocks):
            if block.id == block_id:
                return si, bi, block
    raise ValidationError(f"no block {block_id} in report {report.id}")


def _with_section_blocks(report: Report, index: int, blocks: list[Block]) -> Report:
    sections = list(report.sections)
    sections[index] = replace(sections[index], blocks=tuple(blocks))
    return replace(report, sections=tuple(sections))


def apply_edit(report: Report, writer_id: str, action: str, params: dict) -> Report:
    """Apply one writer edit and recompute the word and item counts.

    Media blocks sourced from submissions may be removed but never have
    their payload reference rewritten.
    """
    if action not in EDIT_ACTIONS:
        raise ValidationError(f"unknown edit action {action!r}")

    if action == "insert_text":
        section_id = params.get("section_id")
        text = params.get("text", "")
        if not text:
            raise ValidationError("insert_text needs non-empty text")
        section_ids = [s.section_id for s in report.sections]
        if section_id not in section_ids:
            raise ValidationError(f"no section {section_id!r} in report")
        index = section_ids.index(section_id)
        blocks = list(report.sections[index].blocks)
        position = params.get("position")
        position = len(blocks) if position is None else max(0, min(int(position), len(blocks)))
        new_block = Block(
            id=f"b-{report.block_seq + 1}", source=WRITER_SOURCE, kind="text", body=text
        )
        blocks.insert(position, new_block)
        edited = _with_section_blocks(report, index, blocks)
        edited = replace(edited, block_seq=report.block_seq + 1)

    elif action == "rewrite_text":
        text = params.get("text", "")
        if not text:
            raise ValidationError("rewrite_text needs non-empty text")
        si, bi, block = _find_block(report, params.get("block_id", ""))
        if block.kind != "text":
            raise ValidationError("media payload references cannot be rewritten")
        blocks = list(report.sections[si].blocks)
        blocks[bi] = replace(block, body=text)
        edited = _with_section_blocks(report, si, blocks)

    elif action == "remove_block":
        si, bi, _ = _find_block(report, params.get("block_id", ""))
        blocks = list(report.sections[si].blocks)
        del blocks[bi]
        edited = _with_section_blocks(report, si, blocks)

    else:  # reorder_within_section
        si, bi, block = _find_block(report, params.get("block_id", ""))
        blocks = list(report.sections[si].blocks)
        del blocks[bi]
        new_index = max(0, min(int(params.get("new_index", 0)), len(blocks)))
        blocks.insert(new_index, block)
        edited = _with_section_blocks(report, si, blocks)

    if edited.editor is None:
        edited = replace(edited, editor=writer_id)
    return _recount(edited)


def compute_stats(state: "EventState") -> dict:
    """Output stats: spend, distinct contributing workers, length, volume.

    ``n_workers`` counts registered workers that issued at least one command;
    the requester and system actions are not workers and do not count.
    """
    report = state.report
    return {
        "cost_cents": sum(entry.amount_cents for entry in state.ledger),
        "n_workers": len(state.actors),
        "report_word_count": report.word_count if report else 0,
        "submitted_items": len(state.submission_order),
    }


STATS_CSV_HEADER = "cost_cents,n_workers,report_word_count,submitted_items"


def stats_csv_row(stats: dict) -> str:
    return (
        f"{stats['cost_cents']},{stats['n_workers']},"
        f"{stats['report_word_count']},{stats['submitted_items']}"
    )


def render_markdown(report: Report, event_name: str, event_location: str) -> str:
    out = io.StringIO()
    out.write(f"# {event_name}\n\n")
    out.write(f"*{event_location}*\n\n")
    if report.byline:
        out.write("By " + ", ".join(report.byline) + "\n\n")
    for section in report.sections:
        out.write(f"## {section.title}\n\n")
        if not section.blocks:
            out.write("*No items.*\n\n")
            continue
        for block in section.blocks:
            if block.kind == "text":
                out.write(block.body + "\n\n")
            else:
                out.write(f"![{block.caption or 'media'}]({block.body})\n\n")
    return out.getvalue()
