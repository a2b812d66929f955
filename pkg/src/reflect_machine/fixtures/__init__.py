"""Self-contained demo domains shipped with the package.

Each fixture directory bundles a model, one or more cases, a datasheet, a
model card, a background sample, the pack list, and pinned config — enough
to run the full pipeline (and the HTTP service) without any external files.
A ``manifest.json`` names the parts; :func:`load_fixture` assembles them
into parsed objects.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from importlib import resources

from ..errors import ParseError
from ..evidence import TriggerConfig
from ..model import (
    CaseInstance,
    Datasheet,
    ModelCard,
    TabularModel,
    parse_background,
    parse_case,
    parse_datasheet,
    parse_model_card,
    parse_model_spec,
)
from ..templates import TemplatePack, load_packs
from ..triggers import SelectionPolicy

FIXTURE_NAMES = ("health", "education")


@dataclass(frozen=True)
class FixtureSet:
    name: str
    description: str
    model: TabularModel
    cases: dict[str, CaseInstance]
    datasheet: Datasheet
    model_card: ModelCard
    background: list[dict]
    pack_names: tuple[str, ...]
    packs: tuple[TemplatePack, ...]
    cfg: TriggerConfig
    policy: SelectionPolicy

    @property
    def base_case(self) -> CaseInstance:
        return self.cases["base"]


def fixture_names() -> tuple[str, ...]:
    return FIXTURE_NAMES


def load_fixture(name: str) -> FixtureSet:
    if name not in FIXTURE_NAMES:
        raise ParseError(
            f"no fixture named '{name}' (have {', '.join(FIXTURE_NAMES)})")
    root = resources.files(__name__).joinpath(name)

    def read(filename: str) -> str:
        return root.joinpath(filename).read_text(encoding="utf-8")

    manifest = json.loads(read("manifest.json"))
    model = parse_model_spec(read(manifest["model"]))
    cases = {
        case_name: parse_case(read(filename), model)
        for case_name, filename in manifest["cases"].items()
    }
    return FixtureSet(
        name=manifest["name"],
        description=manifest["description"],
        model=model,
        cases=cases,
        datasheet=parse_datasheet(read(manifest["datasheet"])),
        model_card=parse_model_card(read(manifest["model_card"])),
        background=parse_background(read(manifest["background"]), model),
        pack_names=tuple(manifest["packs"]),
        packs=tuple(load_packs(list(manifest["packs"]))),
        cfg=TriggerConfig.from_dict(manifest["config"]),
        policy=SelectionPolicy.from_dict(manifest["policy"]),
    )
