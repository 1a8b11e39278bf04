// FHIR-subset questionnaire rendering flow, mirroring the gateway's
// enableWhen semantics: boolean/choice items, "=" operator, an unanswered
// source disables the item. Screens are a pure function of (model, answers).

export type AnswerValue = boolean | string;

export interface EnableWhen {
  question: string;
  answer: AnswerValue;
}

export interface Item {
  linkId: string;
  text: string;
  type: "boolean" | "choice";
  answerOptions: string[];
  enableWhen: EnableWhen[];
}

export interface QuestionnaireModel {
  canonicalId: string;
  title: string;
  items: Item[];
}

export class QuestionnaireParseError extends Error {}

export function parseQuestionnaire(doc: any): QuestionnaireModel {
  if (doc?.resourceType !== "Questionnaire") {
    throw new QuestionnaireParseError(
      `expected a Questionnaire, got ${doc?.resourceType}`,
    );
  }
  const canonical = doc.url ?? doc.id;
  if (!canonical) throw new QuestionnaireParseError("questionnaire has no url");
  const items: Item[] = [];
  const seen = new Set<string>();
  for (const raw of doc.item ?? []) {
    if (!raw.linkId) throw new QuestionnaireParseError("item without linkId");
    if (seen.has(raw.linkId)) {
      throw new QuestionnaireParseError(`duplicate linkId ${raw.linkId}`);
    }
    if (raw.type !== "boolean" && raw.type !== "choice") {
      throw new QuestionnaireParseError(
        `item ${raw.linkId}: unsupported type ${raw.type}`,
      );
    }
    const enableWhen: EnableWhen[] = (raw.enableWhen ?? []).map((ew: any) => {
      if (ew.operator !== "=") {
        throw new QuestionnaireParseError(
          `item ${raw.linkId}: unsupported operator ${ew.operator}`,
        );
      }
      const answer =
        "answerBoolean" in ew
          ? Boolean(ew.answerBoolean)
          : ew.answerCoding?.code ?? ew.answerString;
      if (answer === undefined) {
        throw new QuestionnaireParseError(
          `item ${raw.linkId}: unsupported enableWhen answer`,
        );
      }
      if (!seen.has(ew.question)) {
        throw new QuestionnaireParseError(
          `item ${raw.linkId}: enableWhen must reference an earlier item`,
        );
      }
      return { question: ew.question, answer };
    });
    items.push({
      linkId: raw.linkId,
      text: raw.text ?? "",
      type: raw.type,
      answerOptions: (raw.answerOption ?? [])
        .map((o: any) => o.valueCoding?.code)
        .filter((c: any) => c !== undefined),
      enableWhen,
    });
    seen.add(raw.linkId);
  }
  return { canonicalId: canonical, title: doc.title ?? "", items };
}

export type Answers = Map<string, AnswerValue>;

export function itemEnabled(item: Item, answers: Answers): boolean {
  return item.enableWhen.every(
    (clause) =>
      answers.has(clause.question) && answers.get(clause.question) === clause.answer,
  );
}

export function nextItems(model: QuestionnaireModel, answers: Answers): Item[] {
  return model.items.filter(
    (item) => !answers.has(item.linkId) && itemEnabled(item, answers),
  );
}

// One-at-a-time administration flow (the clinic screen shows one question).
export class QuestionnaireFlow {
  readonly model: QuestionnaireModel;
  readonly answers: Answers = new Map();
  readonly presentedOrder: string[] = [];

  constructor(model: QuestionnaireModel) {
    this.model = model;
    this.notePresented();
  }

  private notePresented(): void {
    const current = this.current();
    if (current && this.presentedOrder.at(-1) !== current.linkId) {
      this.presentedOrder.push(current.linkId);
    }
  }

  current(): Item | null {
    return nextItems(this.model, this.answers)[0] ?? null;
  }

  complete(): boolean {
    return this.current() === null;
  }

  answer(linkId: string, value: AnswerValue): void {
    const current = this.current();
    if (!current || current.linkId !== linkId) {
      throw new Error(`item ${linkId} is not the one being presented`);
    }
    if (current.type === "boolean" && typeof value !== "boolean") {
      throw new Error(`item ${linkId} expects a boolean answer`);
    }
    if (current.type === "choice" && !current.answerOptions.includes(String(value))) {
      throw new Error(`item ${linkId} expects one of ${current.answerOptions}`);
    }
    this.answers.set(linkId, value);
    this.notePresented();
  }

  buildResponse(subjectId: string, authored: string): object {
    if (!this.complete()) {
      throw new Error("questionnaire is not complete");
    }
    return {
      resourceType: "QuestionnaireResponse",
      questionnaire: this.model.canonicalId,
      status: "completed",
      subject: { reference: `Patient/${subjectId}` },
      authored,
      item: [...this.answers.entries()].map(([linkId, value]) => ({
        linkId,
        answer: [
          typeof value === "boolean"
            ? { valueBoolean: value }
            : { valueCoding: { code: value } },
        ],
      })),
    };
  }
}
