class LLM:
    def __init__(self, model):
        self.model = model
        self.system_prompt = None

    def query(self, prompt):
        return self.client().complete(prompt)

    def client(self):
        raise NotImplementedError
