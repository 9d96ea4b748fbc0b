"""Real model backends (optional; requires the `backends` extra).

These adapters wire a Hugging Face seq2seq model and a dual-encoder to the
generation contracts, with the hyperparameter defaults used throughout the
package (seq2seq: lr 6e-6, batch 8, 10 epochs, patience 4; dual-encoder:
lr 2.5e-6, batch 150, 100 epochs, patience 4, margin 0.02, 2 pre-batches).
The deterministic stubs in genmodels cover all tests; nothing here is
imported unless a real backend is requested.
"""

from __future__ import annotations

import numpy as np

from .contrastive import PreBatchRing
from .genmodels import (
    DUAL_ENCODER_TRAINING,
    SEQ2SEQ_TRAINING,
    DecodingConfig,
    TrainConfig,
)


class Seq2SeqBackend:
    """Conditional generator backed by a Hugging Face seq2seq checkpoint."""

    def __init__(self, model_name: str, device: str = "cpu"):
        import torch
        from transformers import AutoModelForSeq2SeqLM, AutoTokenizer

        self._torch = torch
        self.tokenizer = AutoTokenizer.from_pretrained(model_name)
        self.model = AutoModelForSeq2SeqLM.from_pretrained(model_name).to(device)
        self.device = device

    def train(self, pairs, config: TrainConfig = SEQ2SEQ_TRAINING) -> list[float]:
        """Finetune on (input text, target text) pairs; returns epoch losses."""
        torch = self._torch
        optimizer = torch.optim.AdamW(
            self.model.parameters(), lr=config.learning_rate, eps=config.epsilon
        )
        pairs = list(pairs)
        losses: list[float] = []
        best = float("inf")
        stale = 0
        self.model.train()
        for _ in range(config.max_epochs):
            total = 0.0
            for start in range(0, len(pairs), config.batch_size):
                batch = pairs[start : start + config.batch_size]
                inputs = self.tokenizer(
                    [src for src, _ in batch],
                    return_tensors="pt", padding=True, truncation=True, max_length=512,
                ).to(self.device)
                labels = self.tokenizer(
                    [tgt for _, tgt in batch],
                    return_tensors="pt", padding=True, truncation=True, max_length=512,
                ).input_ids.to(self.device)
                labels[labels == self.tokenizer.pad_token_id] = -100
                loss = self.model(**inputs, labels=labels).loss
                optimizer.zero_grad()
                loss.backward()
                optimizer.step()
                total += float(loss)
            losses.append(total)
            if total < best:
                best, stale = total, 0
            else:
                stale += 1
                if stale >= config.patience:
                    break
        return losses

    def generate(self, text: str, config: DecodingConfig):
        inputs = self.tokenizer(
            text, return_tensors="pt", truncation=True, max_length=512
        ).to(self.device)
        kwargs = dict(
            num_beams=config.beam_size,
            num_return_sequences=max(config.num_return, 1),
            repetition_penalty=config.repetition_penalty,
            output_scores=True,
            return_dict_in_generate=True,
        )
        if config.num_groups > 1:
            kwargs["num_beam_groups"] = config.num_groups
            kwargs["diversity_penalty"] = config.diversity_penalty
        if config.constrained and config.constraint_bank is not None:
            ids = [
                self.tokenizer(entry, add_special_tokens=False).input_ids
                for entry in config.constraint_bank.sorted()
            ]
            kwargs["force_words_ids"] = [[seq for seq in ids if seq]]
        self.model.eval()
        with self._torch.no_grad():
            result = self.model.generate(**inputs, **kwargs)
        texts = self.tokenizer.batch_decode(result.sequences, skip_special_tokens=True)
        scores = (
            result.sequences_scores.tolist()
            if getattr(result, "sequences_scores", None) is not None
            else list(range(len(texts), 0, -1))
        )
        ranked = sorted(zip(texts, scores), key=lambda pair: -pair[1])
        return [(t, float(s)) for t, s in ranked]


class BiEncoderBackend:
    """Dual encoder with mean pooling and normalization over a shared base."""

    def __init__(self, model_name: str, device: str = "cpu"):
        import torch
        from transformers import AutoModel, AutoTokenizer

        self._torch = torch
        self.tokenizer = AutoTokenizer.from_pretrained(model_name)
        self.query_encoder = AutoModel.from_pretrained(model_name).to(device)
        self.candidate_encoder = AutoModel.from_pretrained(model_name).to(device)
        self.device = device

    def _encode(self, encoder, text: str):
        torch = self._torch
        inputs = self.tokenizer(
            text, return_tensors="pt", truncation=True, max_length=512
        ).to(self.device)
        with torch.no_grad():
            hidden = encoder(**inputs).last_hidden_state
        mask = inputs.attention_mask.unsqueeze(-1)
        pooled = (hidden * mask).sum(dim=1) / mask.sum(dim=1)
        pooled = torch.nn.functional.normalize(pooled, dim=-1)
        return pooled[0].cpu().numpy().astype(np.float64)

    def encode_query(self, text: str) -> np.ndarray:
        return self._encode(self.query_encoder, text)

    def encode_candidate(self, text: str) -> np.ndarray:
        return self._encode(self.candidate_encoder, text)

    def train(self, triples, config: TrainConfig = DUAL_ENCODER_TRAINING) -> list[float]:
        """Contrastive finetuning over (query, positive, [negatives]) triples.

        Negatives combine in-batch candidates with a pre-batch ring of the
        configured depth; loss is the additive-margin InfoNCE.
        """
        torch = self._torch
        params = list(self.query_encoder.parameters()) + list(
            self.candidate_encoder.parameters()
        )
        optimizer = torch.optim.AdamW(params, lr=config.learning_rate, eps=config.epsilon)
        ring = PreBatchRing(depth=config.pre_batches)
        triples = list(triples)
        losses: list[float] = []
        for _ in range(config.max_epochs):
            total = 0.0
            for start in range(0, len(triples), config.batch_size):
                batch = triples[start : start + config.batch_size]
                loss = torch.zeros((), device=self.device)
                batch_candidates = []
                for query, positive, extra_negs in batch:
                    q = self._encode_train(self.query_encoder, query)
                    pos = self._encode_train(self.candidate_encoder, positive)
                    negs = [
                        self._encode_train(self.candidate_encoder, n) for n in extra_negs
                    ]
                    negs += [torch.tensor(v, device=self.device) for v in ring.candidates()]
                    pos_score = (q * pos).sum()
                    if negs:
                        neg_scores = torch.stack([(q * n).sum() for n in negs])
                        logits = torch.cat(
                            [((pos_score - config.additive_margin) / 0.05).reshape(1),
                             neg_scores / 0.05]
                        )
                        loss = loss + (torch.logsumexp(logits, 0) - logits[0])
                    batch_candidates.append(pos.detach().cpu().numpy())
                optimizer.zero_grad()
                if loss.requires_grad:
                    loss.backward()
                    optimizer.step()
                ring.push(batch_candidates)
                total += float(loss)
            losses.append(total)
        return losses

    def _encode_train(self, encoder, text: str):
        torch = self._torch
        inputs = self.tokenizer(
            text, return_tensors="pt", truncation=True, max_length=512
        ).to(self.device)
        hidden = encoder(**inputs).last_hidden_state
        mask = inputs.attention_mask.unsqueeze(-1)
        pooled = (hidden * mask).sum(dim=1) / mask.sum(dim=1)
        return torch.nn.functional.normalize(pooled, dim=-1)[0]
