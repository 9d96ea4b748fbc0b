import json

import pytest

from ideabench.corpus import TaskInstance
from ideabench.inspiration import NeighborSet
from ideabench.prompting import (
    REMOTE_TOKEN_BUDGET,
    TRAINABLE_TOKEN_BUDGET,
    WhitespaceTokenizer,
    compose_model_input,
    dump_template_reference,
    fewshot_prompt,
    seed_prompt,
)


def inst(i, seed="knowledge acquisition", target_type="Method", direction="backward",
         background="current plms are static.", target="model expansion"):
    return TaskInstance(
        instance_id=f"i{i}", seed_term=seed, target_type=target_type,
        direction=direction, background=background, paper_id=f"p{i}", year=2019,
        target_node=target,
    )


class TestSeedPrompt:
    def test_forward_exact(self):
        assert seed_prompt("data augmentation", "Task", "forward") == (
            "data augmentation is used for Task"
        )

    def test_backward_exact(self):
        assert seed_prompt("Irish language learning", "Method", "backward") == (
            "Irish language learning is done by using Method"
        )

    def test_type_surface_forms(self):
        assert seed_prompt("x", "Other Scientific Terms", "backward") == (
            "x is done by using OtherScientificTerm"
        )
        assert seed_prompt("x", "Evaluation Metric", "forward") == "x is used for Metric"
        assert seed_prompt("x", "Generic Terms", "forward") == "x is used for Generic"

    def test_casing_preserved(self):
        assert seed_prompt("BERT", "Method", "forward") == "BERT is used for Method"

    def test_bad_direction(self):
        with pytest.raises(ValueError):
            seed_prompt("x", "Task", "sideways")


class TestComposeModelInput:
    def test_plain_exact(self):
        assert compose_model_input("x is used for Task", [], "bg.") == (
            "x is used for Task | context: bg."
        )

    def test_enriched_exact(self):
        assert compose_model_input("x is used for Task", ["a", "b"], "bg.") == (
            "x is used for Task | retrieve: a, b | context: bg."
        )

    def test_under_budget_untouched(self):
        text = compose_model_input("p", ["n"], "short context")
        assert len(WhitespaceTokenizer().tokenize(text)) < TRAINABLE_TOKEN_BUDGET

    def test_truncated_to_exact_budget(self):
        background = " ".join(f"w{i}" for i in range(600))
        text = compose_model_input("x is used for Task", [], background, token_budget=50)
        tokens = WhitespaceTokenizer().tokenize(text)
        assert len(tokens) == 50
        assert text.startswith("x is used for Task | context:")

    def test_context_dropped_before_retrieval(self):
        neighbors = [f"n{i}" for i in range(10)]
        background = " ".join(f"w{i}" for i in range(100)) + " LASTWORD"
        text = compose_model_input("p", neighbors, background, token_budget=20)
        assert "LASTWORD" not in text
        assert "retrieve:" in text

    def test_prompt_never_dropped(self):
        with pytest.raises(ValueError):
            compose_model_input("one two three four five", [], "bg", token_budget=3)

    def test_remote_budget_larger(self):
        assert REMOTE_TOKEN_BUDGET == 2048
        assert TRAINABLE_TOKEN_BUDGET == 512

    def test_zero_budget(self):
        with pytest.raises(ValueError):
            compose_model_input("p", [], "bg", token_budget=0)


class TestFewshotPrompt:
    def test_sentence_forward_template(self):
        target = inst(0, seed="argument mining", target_type="Method",
                      direction="forward", background="bg one.")
        text = fewshot_prompt(target, [], task="sentence")
        assert text == (
            "Consider the following context: bg one. "
            "In that context, which Method can be used for argument mining, and why?"
        )

    def test_sentence_backward_template(self):
        target = inst(0, seed="beam search", target_type="Task",
                      direction="backward", background="bg.")
        text = fewshot_prompt(target, [], task="sentence")
        assert text.endswith("In that context, which Task do we use beam search, and why?")

    def test_node_templates_drop_why(self):
        fwd = fewshot_prompt(inst(0, direction="forward"), [], task="node")
        bwd = fewshot_prompt(inst(0, direction="backward"), [], task="node")
        assert ", and why" not in fwd
        assert ", and why" not in bwd
        assert fwd.endswith("?") and bwd.endswith("?")

    def test_node_start_prompts(self):
        fwd = fewshot_prompt(
            inst(0, seed="task x", target_type="Method", direction="forward"),
            [], task="node",
        )
        assert fwd.splitlines()[0] == (
            "Suggest a Method that can be used for a natural language processing task x"
        )
        bwd = fewshot_prompt(
            inst(0, seed="task x", target_type="Method", direction="backward"),
            [], task="node",
        )
        assert bwd.splitlines()[0] == (
            "Suggest a Method that for a natural language processing task x"
        )

    def test_examples_carry_gold_and_query_does_not(self):
        examples = [(inst(1, background="ex bg."), "GOLD_ONE")]
        text = fewshot_prompt(inst(0), examples, task="sentence")
        lines = text.splitlines()
        assert len(lines) == 2
        assert lines[0].endswith("GOLD_ONE")
        assert "GOLD_ONE" not in lines[1]

    def test_retrieved_mode_orders_by_similarity(self):
        examples = [(inst(1), "g1"), (inst(2), "g2"), (inst(3), "g3")]
        text = fewshot_prompt(
            inst(0), examples, mode="retrieved", task="sentence",
            similarities=[0.1, 0.9, 0.5],
        )
        lines = text.splitlines()
        assert [ln[-2:] for ln in lines[:3]] == ["g2", "g3", "g1"]

    def test_retrieved_mode_requires_similarities(self):
        with pytest.raises(ValueError):
            fewshot_prompt(inst(0), [(inst(1), "g")], mode="retrieved")

    def test_retrieval_block_appended_to_target(self):
        neighbors = NeighborSet(semantic=("a", "b"), kg=("c",), citation=())
        text = fewshot_prompt(inst(0), [], task="sentence", neighbors=neighbors)
        assert "The retrieval results are: a, b, c" in text

    def test_no_retrieval_block_without_neighbors(self):
        text = fewshot_prompt(inst(0), [], task="sentence")
        assert "The retrieval results are" not in text

    def test_bad_task_and_mode(self):
        with pytest.raises(ValueError):
            fewshot_prompt(inst(0), [], task="paragraph")
        with pytest.raises(ValueError):
            fewshot_prompt(inst(0), [], mode="nearest")


class TestTemplateReference:
    def test_dump_contains_exact_examples(self, tmp_path):
        path = tmp_path / "templates.json"
        dump_template_reference(path)
        data = json.loads(path.read_text())
        assert data["examples"]["seed_forward"] == "data augmentation is used for Task"
        assert data["examples"]["enriched_input"] == (
            "x is used for Task | retrieve: a, b | context: bg."
        )
        assert data["templates"]["forward_seed"] == "{v} is used for {p}"
        assert data["templates"]["neighbor_join"] == ", "
