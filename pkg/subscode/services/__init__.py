"""pipeline stages: corpus, language model, substitutes, sampling, embedding, evaluation"""
