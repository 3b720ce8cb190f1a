"""Which in-context examples push a sentiment prompt toward "Positive"?

Each few-shot example is one feature.  Dropping an example removes it from
the prompt entirely (the prompt function skips empty values), and exact
Shapley values over the four examples need 16 model evaluations.

    python demos/few_shot.py [--figure few_shot.png]
"""

import argparse

from lm_attr import MockModel, TemplateInput, attribute
from lm_attr.render import plot_heatmap, render_terminal

EXAMPLES = [
    "'The movie was ok, the actors weren't great' -> Negative",
    "'I loved it, it was an amazing story!' -> Positive",
    "'Total waste of time!!' -> Negative",
    "'Won't recommend' -> Negative",
]
QUERY = "'Fun for the whole family' ->"


def prompt_fn(*examples):
    shots = [e for e in examples if e]
    return "\n".join(shots + [QUERY])


def positive_probability(context):
    # more negative examples in context pull the label toward Negative
    negatives = context.count("-> Negative")
    positives = context.count("-> Positive")
    p = 0.7 - 0.08 * negatives + 0.05 * positives
    return {" Positive": p, " Negative": 1 - p - 0.01}


def main():
    parser = argparse.ArgumentParser()
    parser.add_argument("--figure")
    args = parser.parse_args()
    model = MockModel([" Positive", " Negative", "<eos>"], fn=positive_probability, model_id="mock-sentiment")
    inp = TemplateInput(prompt_fn, EXAMPLES)
    result = attribute(model, inp, "shapley-exact", " Positive")
    print(render_terminal(result, orientation="features-left"), end="")
    if args.figure:
        plot_heatmap(result, args.figure)


if __name__ == "__main__":
    main()
