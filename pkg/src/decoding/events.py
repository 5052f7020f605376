"""
События потокового декодирования
"""
import enum
from typing import List, Optional

from pydantic import BaseModel, ConfigDict, Field


class DecodeEventKind(str, enum.Enum):
    """Тип события"""
    BOUNDARY_TRIGGERED = "BoundaryTriggered"
    TEXT_EMITTED = "TextEmitted"
    CAP_REACHED = "CapReached"


class DecodeEvent(BaseModel):
    """
    Событие декодера

    stream_index - позиция в (дедуплицированном) потоке: для границы ее индекс,
    для текста последний видимый индекс потока в момент выдачи.
    consumed_inputs - число исходных речевых токенов, прочитанных к этому моменту.
    """
    model_config = ConfigDict(frozen=True)

    kind: DecodeEventKind
    stream_index: int
    consumed_inputs: int
    token: Optional[int] = None


class DecodeResult(BaseModel):
    """Итог декодирования одного высказывания"""
    utt_id: str = "-"
    text: List[int] = Field(default_factory=list)
    events: List[DecodeEvent] = Field(default_factory=list)
    score: Optional[float] = None

    def emitted(self) -> List[DecodeEvent]:
        return [event for event in self.events if event.kind == DecodeEventKind.TEXT_EMITTED]

    def triggers(self) -> List[DecodeEvent]:
        return [event for event in self.events if event.kind == DecodeEventKind.BOUNDARY_TRIGGERED]
