"""
Conditioning a decoder on retrieved fragments
=============================================

The toy decoder emits the argmax of softmax(W_o h_t + b_o) step by step.
Its output layer is read off the index, so different retrieved fragments
lead to different tokens.  The same fragments can instead be rendered into
a prompt for an external chat-completion model.
"""

from grag.cli import bundled_corpus
from grag.generation import ToyGenerator, GenerationCondition, assemble_prompt, toy_decoder_from_index
from grag.ingest import parse_corpus
from grag.pipeline import Pipeline

pipe = Pipeline.seeded(seed=0)
pipe.ingest(parse_corpus(bundled_corpus()))

params = toy_decoder_from_index(pipe.index)
print("decoder vocabulary:", len(params.vocab), "tokens, hidden width", params.h)
generator = ToyGenerator(params, max_tokens=6)

for k in (1, 3, 10):
    hits, record = pipe.answer("what gas do plants absorb for photosynthesis", k, generator)
    print(f"k={k:<2} {record.text!r:60} ({record.finished_by}) from {hits.ids[:3]}...")

# Prompt sent by the external generator (GRAG_LLM_ENDPOINT / _MODEL / _API_KEY)
hits = pipe.retrieve("who invented the telephone", 2)
print("\n" + assemble_prompt(GenerationCondition("who invented the telephone", pipe.condition(hits))))
