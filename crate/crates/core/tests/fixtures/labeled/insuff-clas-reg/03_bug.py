from qiskit import ClassicalRegister, QuantumCircuit, QuantumRegister, transpile

q = QuantumRegister(2, "q")
c = ClassicalRegister(1, "c")
qc = QuantumCircuit(q)  # expect: insuff-clas-reg
qc.add_register(c)
qc.h(q[0])
qc.cx(q[0], q[1])
qc.measure(q[1], c[0])
