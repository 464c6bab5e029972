"""Chat-completion client for LLM-authored rewrites.

The output contract is strict: exactly one fenced code block containing a
complete module with the parent's port interface. Anything else is retried
up to the configured limit and then dropped, letting the proposer fall
back to a rule-based slot; a failed LLM never aborts a run. Transcripts
are persisted so stub-based contract tests can replay them.
"""

from __future__ import annotations

import json
import os
import re
from dataclasses import dataclass

import requests

from .dsl import RtlDesign, RtlError, parse, print_design
from .proposer import Proposal, LlmSettings, PROVENANCE_LLM
from .skills import SkillLibrary, match
from .timing import BottleneckDiagnosis

_FENCE_RE = re.compile(r"```[a-zA-Z]*\n(.*?)```", re.DOTALL)

SYSTEM_DIRECTIVE = (
    "You optimize the timing of small RTL modules. Reply with exactly one "
    "fenced code block containing a complete rewritten module. Keep the "
    "module name and port list identical and preserve cycle-level behavior, "
    "including pipeline latency."
)


@dataclass
class Transcript:
    request: dict
    response_text: str | None
    outcome: str


class LlmClient:
    def __init__(self, settings: LlmSettings, transcript_dir: str | None = None):
        self.settings = settings
        self.transcript_dir = transcript_dir
        self.transcripts: list[Transcript] = []
        self._counter = 0

    def _headers(self) -> dict:
        headers = {"Content-Type": "application/json"}
        token = os.environ.get(self.settings.credential_env, "")
        if token:
            headers["Authorization"] = f"Bearer {token}"
        return headers

    def _prompt(self, parent: RtlDesign, diagnosis: BottleneckDiagnosis | None,
                library: SkillLibrary) -> list[dict]:
        lines = [f"Module source:\n{print_design(parent)}"]
        if diagnosis is not None:
            lines.append(
                f"Critical path: {diagnosis.path.startpoint} -> "
                f"{diagnosis.path.endpoint}, slack {diagnosis.path.slack_ns:.3f} ns. "
                f"Root cause: {diagnosis.root_cause} ({diagnosis.evidence}).")
            prohibitions = match(diagnosis.pattern, library).prohibitions
            if prohibitions:
                avoid = ", ".join(s.strategy for s in prohibitions)
                lines.append(f"Do not attempt these known-bad strategies: {avoid}.")
        lines.append("Rewrite the module to shorten the critical path.")
        return [
            {"role": "system", "content": SYSTEM_DIRECTIVE},
            {"role": "user", "content": "\n\n".join(lines)},
        ]

    def _record(self, transcript: Transcript):
        self.transcripts.append(transcript)
        if self.transcript_dir:
            os.makedirs(self.transcript_dir, exist_ok=True)
            path = os.path.join(self.transcript_dir, f"call_{self._counter:04d}.json")
            self._counter += 1
            with open(path, "w") as fh:
                json.dump({"request": transcript.request,
                           "response": transcript.response_text,
                           "outcome": transcript.outcome}, fh, indent=2)

    def _extract_module(self, text: str, parent: RtlDesign) -> RtlDesign:
        blocks = _FENCE_RE.findall(text)
        if not blocks:
            raise ValueError("response contains no fenced code block")
        design = parse(blocks[0], filename=parent.filename)
        if design.port_signature() != parent.port_signature():
            raise ValueError("rewritten module changes the port interface")
        return design

    def propose(self, parent: RtlDesign, diagnosis: BottleneckDiagnosis | None,
                library: SkillLibrary) -> Proposal | None:
        """One structured request; returns None after retries are exhausted."""
        messages = self._prompt(parent, diagnosis, library)
        payload = {"model": self.settings.model, "messages": messages}
        url = self.settings.base_url.rstrip("/") + "/chat/completions"
        for attempt in range(self.settings.max_retries + 1):
            text = None
            try:
                response = requests.post(url, json=payload, headers=self._headers(),
                                         timeout=self.settings.timeout_s)
                response.raise_for_status()
                text = response.json()["choices"][0]["message"]["content"]
                design = self._extract_module(text, parent)
            except (requests.RequestException, ValueError, KeyError, RtlError) as exc:
                self._record(Transcript(payload, text, f"attempt {attempt}: {exc}"))
                continue
            self._record(Transcript(payload, text, "accepted"))
            return Proposal(design, PROVENANCE_LLM, None, diagnosis,
                            rationale=f"llm rewrite ({self.settings.model})")
        return None
