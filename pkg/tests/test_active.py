import numpy as np
import pytest

from phimp import (Alphabet, Environment, FeatureMap, InputError, PenaltyScheme,
                   Policy, SuffixSet, active_select, compile_suffix_map,
                   embed_reward_map, event_index, policy_induced_chain,
                   read_environment, rollout, select, with_baseline,
                   write_environment)
from phimp.selection import score_map


def reward_chain_env(p_stay0=0.9, p_stay1=0.8, action_count=2, observation_count=1):
    """Environment whose reward is an order-1 chain and the state is the last
    reward; actions and observations carry nothing."""
    reward_map = compile_suffix_map(SuffixSet(Alphabet(2), ((0,), (1,))))
    event_map = embed_reward_map(reward_map, action_count, observation_count)
    emissions = np.zeros((2, action_count, observation_count * 2))
    emissions[0, :, :] = [p_stay0, 1 - p_stay0]
    emissions[1, :, :] = [1 - p_stay1, p_stay1]
    return Environment(action_count=action_count, observation_count=observation_count,
                       reward_count=2, event_map=event_map, emissions=emissions)


def iid_reward_env(p=0.3):
    env = reward_chain_env()
    env.emissions[0, :, :] = [1 - p, p]
    env.emissions[1, :, :] = [1 - p, p]
    return env


class TestEnvironment:
    def test_emission_rows_must_sum_to_one(self):
        env = reward_chain_env()
        bad = env.emissions.copy()
        bad[0, 0, 0] = 0.5
        with pytest.raises(InputError):
            Environment(action_count=2, observation_count=1, reward_count=2,
                        event_map=env.event_map, emissions=bad)

    def test_unbounded_event_map_rejected(self):
        parity = FeatureMap(kind="general-fsm", alphabet_size=4, state_count=2,
                            start_state=0,
                            step_table=np.array([[0, 1, 0, 1], [1, 0, 1, 0]]))
        with pytest.raises(InputError, match="bounded"):
            Environment(action_count=2, observation_count=1, reward_count=2,
                        event_map=parity,
                        emissions=np.full((2, 2, 2), 0.5))

    def test_event_alphabet_size_checked(self):
        env = reward_chain_env()
        with pytest.raises(InputError):
            Environment(action_count=2, observation_count=2, reward_count=2,
                        event_map=env.event_map, emissions=env.emissions)

    def test_json_round_trip(self, tmp_path):
        env = reward_chain_env()
        path = tmp_path / "env.json"
        write_environment(path, env)
        back = read_environment(path)
        assert back.action_count == env.action_count
        assert np.allclose(back.emissions, env.emissions)
        assert np.array_equal(back.event_map.step_table, env.event_map.step_table)

    def test_event_index_matches_pair_encoding(self):
        trace = rollout(reward_chain_env(), Policy.uniform(2, 2), 50, seed=0)
        paired = trace.to_paired()
        joint = paired.joint_sequence()
        assert np.array_equal(trace.event_symbols(), joint.items)


class TestRollout:
    def test_reproducible(self):
        env = reward_chain_env()
        policy = Policy.uniform(2, 2)
        a = rollout(env, policy, 500, seed=3)
        b = rollout(env, policy, 500, seed=3)
        assert np.array_equal(a.rewards, b.rewards)
        assert np.array_equal(a.actions, b.actions)

    def test_deterministic_environment_and_policy(self):
        # single action, single observation, rewards alternate
        env = reward_chain_env(p_stay0=0.0, p_stay1=1.0, action_count=1)
        policy = Policy(np.array([[1.0], [1.0]]))
        trace = rollout(env, policy, 6, seed=1)
        assert list(trace.rewards) == [1, 1, 1, 1, 1, 1]

    def test_uniform_policy_action_frequencies(self):
        env = reward_chain_env()
        policy = Policy.uniform(2, 2)
        trace = rollout(env, policy, 100_000, seed=7)
        for state_rewards in (0, 1):
            mask = np.concatenate([[env.event_map.start_state == state_rewards],
                                   trace.rewards[:-1] == state_rewards])
            freq = trace.actions[mask].mean()
            assert abs(freq - 0.5) <= 0.02

    def test_state_frequencies_match_policy_induced_chain(self):
        env = reward_chain_env()
        policy = Policy(np.array([[0.7, 0.3], [0.4, 0.6]]))
        chain = policy_induced_chain(env, policy)
        assert np.allclose(chain.sum(axis=1), 1.0, atol=1e-12)
        trace = rollout(env, policy, 100_000, seed=11)
        # environment states are the last rewards
        states = np.concatenate([[env.event_map.start_state], trace.rewards])
        for s in (0, 1):
            mask = states[:-1] == s
            for t in (0, 1):
                empirical = (states[1:][mask] == t).mean()
                assert abs(empirical - chain[s, t]) <= 0.02

    def test_policy_shape_checked(self):
        with pytest.raises(InputError):
            rollout(reward_chain_env(), Policy(np.array([[0.5, 0.5]])), 10, seed=0)


class TestActiveSelect:
    def test_equals_manual_pairing_exactly(self):
        env = reward_chain_env()
        trace = rollout(env, Policy.uniform(2, 2), 5000, seed=2)
        scheme = PenaltyScheme.from_string("bic:markov", 2)
        maps = [env.event_map]
        via_active = active_select(trace, maps, scheme)
        paired = trace.to_paired()
        via_manual = select(with_baseline(maps, paired.joint_size), paired,
                            "icost", scheme)
        assert via_active.chosen_map_id == via_manual.chosen_map_id
        assert [b.total for b in via_active.costs] == \
            [b.total for b in via_manual.costs]

    def test_iid_rewards_choose_single_state_map(self):
        env = iid_reward_env()
        scheme = PenaltyScheme.from_string("bic:markov", 2)
        wins = 0
        for seed in range(5):
            trace = rollout(env, Policy.uniform(2, 2), 10_000, seed=seed)
            result = active_select(trace, [env.event_map], scheme)
            wins += result.chosen_map_id == "trivial"
        assert wins >= 4

    def test_reward_chain_chooses_embedded_reward_map(self):
        env = reward_chain_env()
        scheme = PenaltyScheme.from_string("bic:markov", 2)
        wins = 0
        for seed in range(5):
            trace = rollout(env, Policy.uniform(2, 2), 10_000, seed=seed)
            result = active_select(trace, [env.event_map], scheme)
            wins += result.chosen_map_id == env.event_map.map_id
        assert wins >= 4

    def test_degenerate_actions_and_observations_reduce_to_passive(self):
        env = reward_chain_env(action_count=1)
        trace = rollout(env, Policy(np.array([[1.0], [1.0]])), 3000, seed=5)
        scheme = PenaltyScheme.from_string("bic:markov", 2)
        paired = trace.to_paired()
        assert paired.x_alphabet.size == 1
        reward_map = compile_suffix_map(SuffixSet(Alphabet(2), ((0,), (1,))))
        active = score_map(env.event_map, paired, "icost", scheme)
        from phimp.sequences import SymbolSequence
        rewards = SymbolSequence(Alphabet(2), trace.rewards)
        passive = score_map(reward_map, rewards, "cost", scheme)
        assert active.data_cost == passive.data_cost
        assert active.total == passive.total


class TestEmbedRewardMap:
    def test_embedded_map_tracks_rewards_only(self):
        reward_map = compile_suffix_map(SuffixSet(Alphabet(2), ((0,), (1,))))
        event_map = embed_reward_map(reward_map, action_count=3, observation_count=2)
        assert event_map.alphabet_size == 12
        for o in range(2):
            for a in range(3):
                for r in range(2):
                    e = event_index(o, a, r, 3, 2)
                    assert event_map.step_table[0, e] == reward_map.step_table[0, r]
